//! Text and CSV rendering. All numbers in CSV rows carry 12 significant
//! digits and the byte output is deterministic for identical inputs.

use std::fmt::Write as _;

use crate::config::RunConfig;
use corrleak::bounds::LogEpsilon;
use corrleak::channel::ExpectedCounts;
use corrleak::montecarlo::McTally;
use corrleak::optimizer::OptimizedPoint;
use corrleak::security::{KeyRateResult, ProtocolPoint, SecurityBudget};

pub const CSV_HEADER: &str = "attenuation_db,xi,n_total,p_send,mu_max,p_pe,mu_equ_a,mu_equ_b,\
e_bit,n_z_lower,n_ph_upper,penalty_bits,key_length_bits,key_rate_per_pulse,status";

/// 12 significant digits; non-finite values serialize as `nan`.
pub fn sig12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "nan".to_string()
    }
}

pub fn csv_row(
    att_db: f64,
    xi: u32,
    n_total: f64,
    point: &ProtocolPoint,
    result: &KeyRateResult,
) -> String {
    let i = &result.intermediates;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        sig12(att_db),
        xi,
        sig12(n_total),
        sig12(point.p_send),
        sig12(point.mu_max),
        sig12(point.p_pe),
        sig12(i.mu_equ_a),
        sig12(i.mu_equ_b),
        sig12(i.e_bit),
        sig12(i.n_z_lower),
        sig12(i.n_ph_upper),
        sig12(i.penalty_bits),
        sig12(result.l_max),
        sig12(result.rate),
        result.status
    )
}

fn result_block(out: &mut String, result: &KeyRateResult) {
    let i = &result.intermediates;
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("status", result.status.to_string());
    kv("key_length_bits", sig12(result.l_max));
    kv("key_rate_per_pulse", sig12(result.rate));
    kv("mu_equ_a", sig12(i.mu_equ_a));
    kv("mu_equ_b", sig12(i.mu_equ_b));
    kv("c0", sig12(i.c0));
    kv("c1", sig12(i.c1));
    kv("c2bar", sig12(i.c2bar));
    kv("p_o_upper", sig12(i.p_o_upper));
    kv("p_b_upper", sig12(i.p_b_upper));
    kv("p_ph", sig12(i.p_ph));
    kv("n_ph_upper", sig12(i.n_ph_upper));
    kv("n_z_lower", sig12(i.n_z_lower));
    kv("e_bit", sig12(i.e_bit));
    kv("penalty_bits", sig12(i.penalty_bits));
    kv("eps1_log2_inv", sig12(i.eps1_log2_inv));
}

pub fn rate_text(cfg: &RunConfig, result: &KeyRateResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# rate at att_db = {}, xi = {}, N = {}",
        cfg.att_a_db.unwrap_or(cfg.att_db),
        cfg.xi,
        cfg.n_total
    );
    result_block(&mut s, result);
    s.push('\n');
    s
}

pub fn optimize_text(cfg: &RunConfig, best: &OptimizedPoint) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# optimized point at att_db = {}, xi = {}, N = {}",
        cfg.att_a_db.unwrap_or(cfg.att_db),
        cfg.xi,
        cfg.n_total
    );
    let _ = writeln!(s, "p_send = {}", sig12(best.point.p_send));
    let _ = writeln!(s, "mu_max = {}", sig12(best.point.mu_max));
    let _ = writeln!(s, "p_pe = {}", sig12(best.point.p_pe));
    result_block(&mut s, &best.result);
    s.push('\n');
    s
}

pub fn budget_text(
    xi: u32,
    budget: &SecurityBudget,
    eps1: LogEpsilon,
    penalty_bits: f64,
) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("xi", xi.to_string());
    kv("eps_tot_log2_inv", budget.eps_tot().log2_inv().to_string());
    kv("eps_log2_inv", budget.eps().log2_inv().to_string());
    kv("eps_bar_log2_inv", budget.eps_bar().log2_inv().to_string());
    kv("eps_cor_log2_inv", budget.eps_cor().log2_inv().to_string());
    kv("eps0_log2_inv", budget.eps0().log2_inv().to_string());
    kv("eps2_log2_inv", budget.eps2().log2_inv().to_string());
    kv("eps3_log2_inv", budget.eps3().log2_inv().to_string());
    kv("eps1_log2_inv", eps1.log2_inv().to_string());
    kv("penalty_bits", penalty_bits.to_string());
    s
}

pub fn monte_carlo_text(tally: &McTally, closed: &ExpectedCounts, samples: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# monte carlo cross-check, {samples} samples");
    let scale = closed.n_total / samples as f64;
    let mut line = |k: &str, got: u64, expected: f64| {
        let _ = writeln!(
            s,
            "{k}: simulated = {got}, closed_form = {}",
            sig12(expected / scale)
        );
    };
    line("n_z_pe", tally.z_pe, closed.n_z_pe);
    line("n_o_pe", tally.o_pe, closed.n_o_pe);
    line("n_b_pe", tally.b_pe, closed.n_b_pe);
    line("n_z_key", tally.z_key, closed.n_z_key);
    line("n_o_key", tally.o_key, closed.n_o_key);
    line("n_b_key", tally.b_key, closed.n_b_key);
    let _ = writeln!(s, "e_bit: simulated = {}, closed_form = {}", sig12(tally.e_bit()), sig12(closed.e_bit));
    s
}
