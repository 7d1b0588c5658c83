//! Straight-line re-evaluation of the whole key-rate pipeline, written
//! directly from the underlying formulas and independent of the library's
//! code paths. The audit suite runs random configurations through both and
//! demands agreement on every intermediate.

pub struct OracleInput {
    pub n_total: f64,
    pub p_pe: f64,
    pub p_send: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub xi: u32,
    pub v0_a: f64,
    pub v1_a: f64,
    pub v0_b: f64,
    pub v1_b: f64,
    pub att_a_db: f64,
    pub att_b_db: f64,
    pub dark_rate: f64,
    pub misalignment: f64,
    pub extinction: f64,
    // Budget exponents, log2(1/eps).
    pub eps_log2: f64,
    pub eps_bar_log2: f64,
    pub eps_cor_log2: f64,
    pub eps0_log2: f64,
    pub eps2_log2: f64,
    pub eps3_log2: f64,
    pub definetti_x: u32,
    pub ec_efficiency: f64,
}

#[derive(Debug, Default)]
pub struct OracleCounts {
    pub n_z_pe: f64,
    pub n_o_pe: f64,
    pub n_b_pe: f64,
    pub n_succ_key: f64,
    pub e_bit: f64,
}

#[derive(Debug)]
pub struct OracleOutput {
    pub counts: OracleCounts,
    pub mu_equ_a: f64,
    pub mu_equ_b: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2bar: f64,
    pub eps1_log2_inv: f64,
    pub p_o_upper: f64,
    pub p_b_upper: f64,
    pub p_ph: f64,
    pub n_ph_upper: f64,
    pub n_z_lower: f64,
    pub penalty_bits: f64,
    pub balance_bits: f64,
    /// None when the pipeline completed; otherwise which wall it hit.
    pub stopped: Option<&'static str>,
}

fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

fn success(a: f64, b: f64, dark: f64, misalignment: f64) -> f64 {
    let vis = 1.0 - 2.0 * misalignment;
    let i_r = (0.5 * (a + b) - vis * (a * b).sqrt()).max(0.0);
    let i_l = 0.5 * (a + b) + vis * (a * b).sqrt();
    (1.0 - (1.0 - dark) * (-i_r).exp()) * ((1.0 - dark) * (-i_l).exp())
}

fn mu_equivalent(xi: u32, v0: f64, v1: f64, p_send: f64) -> Option<(f64, f64, f64)> {
    let bracket = (1.0 - p_send) * v0.sqrt() + p_send * v1.sqrt();
    let factor = if xi == 0 {
        1.0
    } else {
        bracket.powf(2.0 * xi as f64)
    };
    let v0x = v0 * factor;
    let v1x = v1 * factor;
    let diff = (v0x * v1x).sqrt() - ((1.0 - v0x) * (1.0 - v1x)).sqrt();
    if diff <= 0.0 {
        None
    } else {
        Some((v0x, v1x, (-2.0 * diff.ln()).max(0.0)))
    }
}

pub fn evaluate(inp: &OracleInput) -> OracleOutput {
    let mut out = OracleOutput {
        counts: OracleCounts::default(),
        mu_equ_a: f64::NAN,
        mu_equ_b: f64::NAN,
        c0: f64::NAN,
        c1: f64::NAN,
        c2bar: f64::NAN,
        eps1_log2_inv: f64::NAN,
        p_o_upper: f64::NAN,
        p_b_upper: f64::NAN,
        p_ph: f64::NAN,
        n_ph_upper: f64::NAN,
        n_z_lower: f64::NAN,
        penalty_bits: f64::NAN,
        balance_bits: f64::NAN,
        stopped: None,
    };
    let ln2 = std::f64::consts::LN_2;
    let xi = inp.xi as f64;
    let p1 = inp.p_send;
    let p0 = 1.0 - p1;
    let key = 1.0 - inp.p_pe;

    // Honest-channel expected statistics.
    let eta_a = 10f64.powf(-inp.att_a_db / 10.0);
    let eta_b = 10f64.powf(-inp.att_b_db / 10.0);
    let (sa, ia) = (inp.mu_a * eta_a, inp.extinction * inp.mu_a * eta_a);
    let (sb, ib) = (inp.mu_b * eta_b, inp.extinction * inp.mu_b * eta_b);
    let q_o = p0 * p0 * success(ia, ib, inp.dark_rate, inp.misalignment);
    let q_z = p1 * p0 * success(sa, ib, inp.dark_rate, inp.misalignment)
        + p0 * p1 * success(ia, sb, inp.dark_rate, inp.misalignment);
    let q_b = p1 * p1 * success(sa, sb, inp.dark_rate, inp.misalignment);
    out.counts.n_z_pe = inp.n_total * inp.p_pe * q_z;
    out.counts.n_o_pe = inp.n_total * inp.p_pe * q_o;
    out.counts.n_b_pe = inp.n_total * inp.p_pe * q_b;
    let n_err_key = inp.n_total * key * (q_o + q_b);
    out.counts.n_succ_key = inp.n_total * key * (q_z + q_o + q_b);
    out.counts.e_bit = if out.counts.n_succ_key > 0.0 {
        n_err_key / out.counts.n_succ_key
    } else {
        0.0
    };

    out.penalty_bits = 2.0 * xi * inp.eps2_log2 + 2.0 * (xi + 1.0) * inp.eps3_log2;

    // Equivalent sources.
    let Some((_, _, mu_a)) = mu_equivalent(inp.xi, inp.v0_a, inp.v1_a, inp.p_send) else {
        out.stopped = Some("no-equivalent-source-a");
        return out;
    };
    out.mu_equ_a = mu_a;
    let Some((_, _, mu_b)) = mu_equivalent(inp.xi, inp.v0_b, inp.v1_b, inp.p_send) else {
        out.stopped = Some("no-equivalent-source-b");
        return out;
    };
    out.mu_equ_b = mu_b;

    out.c0 = (-(mu_a + mu_b) / 4.0).exp();
    out.c1 = 1.0 / out.c0;
    out.c2bar = ((out.c0 + out.c1 - 2.0 * (-mu_a / 2.0).exp())
        * (out.c0 + out.c1 - 2.0 * (-mu_b / 2.0).exp()))
    .max(0.0)
    .sqrt();

    // eps1 = ((eps - xi eps2)/(2 xi + 1) - eps3)^(xi+1), in the log domain.
    let eps = 2f64.powf(-inp.eps_log2);
    let eps2 = 2f64.powf(-inp.eps2_log2);
    let eps3 = 2f64.powf(-inp.eps3_log2);
    let base = (eps - xi * eps2) / (2.0 * xi + 1.0) - eps3;
    if base <= 0.0 {
        out.stopped = Some("budget-infeasible");
        return out;
    }
    out.eps1_log2_inv = (xi + 1.0) * -base.log2();

    // ln(1/eps_eff) = 2 ln(1/eps1) + ln 3 + ln g_{N,x}.
    let mut ln_g = 0.0;
    let n_int = inp.n_total as u64;
    for k in 1..=(inp.definetti_x as u64 - 1) {
        ln_g += ((n_int + k) as f64).ln() - (k as f64).ln();
    }
    let l = 2.0 * out.eps1_log2_inv * ln2 + 3f64.ln() + ln_g;

    let cher_up = |x: f64| x + l + (l * l + 2.0 * x * l).sqrt();
    let ratio = key / inp.p_pe;
    out.p_o_upper = ratio * cher_up(out.counts.n_o_pe) / inp.n_total;
    out.p_b_upper = ratio * cher_up(out.counts.n_b_pe) / inp.n_total;

    let sig_o = out.p_o_upper / (key * p0 * p0);
    let sig_b = out.p_b_upper / (key * p1 * p1);
    let six = out.c0 * out.c0 * sig_o
        + out.c1 * out.c1 * sig_b
        + out.c2bar * out.c2bar
        + 2.0 * out.c0 * out.c1 * (sig_o * sig_b).sqrt()
        + out.c0 * out.c2bar * sig_o.sqrt()
        + out.c1 * out.c2bar * sig_b.sqrt();
    out.p_ph = (key * p0 * p1 / 2.0 * six).clamp(0.0, 1.0);

    let e_ph = inp.n_total * out.p_ph;
    out.n_ph_upper = e_ph + 0.5 * l + 0.5 * (l * l + 8.0 * e_ph * l).sqrt();

    let lz = inp.eps0_log2 * ln2;
    let nz_pe = out.counts.n_z_pe;
    let cher_low = nz_pe + 0.5 * lz - 0.5 * (lz * lz + 8.0 * nz_pe * lz).sqrt();
    out.n_z_lower = (cher_low.max(0.0) / inp.p_pe - nz_pe).max(0.0);
    if out.n_z_lower <= 0.0 {
        out.stopped = Some("no-z-events");
        return out;
    }
    let rate = out.n_ph_upper / out.n_z_lower;
    if rate >= 0.5 {
        out.stopped = Some("phase-error-saturated");
        return out;
    }

    out.balance_bits = out.n_z_lower * (1.0 - h(rate))
        - inp.ec_efficiency * out.counts.n_succ_key * h(out.counts.e_bit)
        - (1.0 + inp.eps_cor_log2)
        - 2.0 * (inp.eps_bar_log2 - 1.0)
        - out.penalty_bits;
    out
}
