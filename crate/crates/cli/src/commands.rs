//! One function per subcommand. Each turns a parsed config into reports and
//! a list of pass/fail gates.

use shiftconv::arith::{gcd_signed, kloosterman_row, primes_up_to, PrimeModulus};
use shiftconv::charsums::{
    adolphson_sperber_census, bound_census, crt_identity_census, CensusFamily, Normalizer, TupleSource,
};
use shiftconv::coeffs::{build_gl2_table, hecke_inequality_check, rankin_selberg_average};
use shiftconv::jutila::{
    build_moduli_set, fourier_coeff, l2_census, l2_error, l2_error_direct, Approximant, L2CensusPoint,
    ModuliSet,
};
use shiftconv::pipeline::{
    dyadic_sharp_eval, error_scaling, optimal_split_census, ExperimentConfig, GSign, SharpSpec, Tables, GL2_WEIGHT,
};
use shiftconv::report::{ExperimentReport, Record};
use shiftconv::transforms::{Gl2Dual, WeightFunctionSpec, GL2_DUAL_CUTOFF};

use crate::config::{field, Config, ConfigError, Field, Kind};

/// A named check with a human-readable detail line.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Gate {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Gate { name: name.to_string(), passed, detail }
    }

    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Gate::new(name, value <= limit, format!("{value:.6e} <= {limit}"))
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<ExperimentReport>,
    pub gates: Vec<Gate>,
}

#[derive(Debug)]
pub enum CommandError {
    Config(ConfigError),
    Core(shiftconv::Error),
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

impl From<shiftconv::Error> for CommandError {
    fn from(e: shiftconv::Error) -> Self {
        CommandError::Core(e)
    }
}

type CmdResult = Result<Outcome, CommandError>;

pub struct Subcommand {
    pub name: &'static str,
    pub about: &'static str,
    pub schema: &'static [Field],
    pub default_config: &'static str,
    pub run: fn(&Config, &dyn Fn(&str)) -> CmdResult,
}

const THREADS: Field = field("threads", Kind::UInt, "0");

pub const SUBCOMMANDS: &[Subcommand] = &[
    Subcommand {
        name: "charsum-census",
        about: "S census over pairs of primes plus an exhaustive Weil check",
        schema: &[
            THREADS,
            field("primes", Kind::UIntList, "3,5,7,11,13,17,19,23,29,31"),
            field("m2_min", Kind::Int, "1"),
            field("m2_max", Kind::Int, "10"),
            field("n_min", Kind::Int, "1"),
            field("n_max", Kind::Int, "10"),
            field("h_min", Kind::Int, "1"),
            field("h_max", Kind::Int, "10"),
            field("ceiling", Kind::Float, "8"),
            field("weil_max_prime", Kind::UInt, "97"),
        ],
        default_config: include_str!("../configs/charsum-census.cfg"),
        run: charsum_census,
    },
    Subcommand {
        name: "t-identity",
        about: "CRT factorization of T on random tuples",
        schema: &[
            THREADS,
            field("q1_primes", Kind::UIntList, "3,5,7,11,13"),
            field("q2_primes", Kind::UIntList, "17,19"),
            field("per_triple", Kind::UInt, "40"),
            field("seed", Kind::UInt, "20240601"),
            field("tolerance", Kind::Float, "1e-6"),
        ],
        default_config: include_str!("../configs/t-identity.cfg"),
        run: t_identity,
    },
    Subcommand {
        name: "bound-census",
        about: "T bound and vanishing census plus the two-variable sum census",
        schema: &[
            THREADS,
            field("q1_primes", Kind::UIntList, "3,5,7,11,13"),
            field("q2_primes", Kind::UIntList, "17,19"),
            field("n", Kind::IntList, "-3,1,2,5,17"),
            field("m", Kind::IntList, "-15,-7,-3,0,1,2,3,5,6,7,11,13,15,17,21,34,39"),
            field("h", Kind::IntList, "1,2,4"),
            field("ceiling", Kind::Float, "8"),
            field("zero_tolerance", Kind::Float, "1e-6"),
            field("as_q1", Kind::UInt, "3"),
            field("as_q2_primes", Kind::UIntList, "5,7,11,13"),
            field("as_ceiling", Kind::Float, "4"),
        ],
        default_config: include_str!("../configs/bound-census.cfg"),
        run: bound_census_cmd,
    },
    Subcommand {
        name: "jutila-l2",
        about: "Mean-square error of the circle approximant",
        schema: &[
            THREADS,
            field("q1_anchors", Kind::UIntList, "3,5"),
            field("q2_anchors", Kind::UIntList, "11,13"),
            field("delta_powers", Kind::FloatList, "1,1.5,2"),
            field("deltas", Kind::FloatList, ""),
            field("h", Kind::Int, "1"),
            field("ceiling", Kind::Float, "8"),
            field("direct_moduli", Kind::UIntList, "5,7"),
            field("direct_delta", Kind::Float, "0.02"),
            field("direct_tolerance", Kind::Float, "0.01"),
        ],
        default_config: include_str!("../configs/jutila-l2.cfg"),
        run: jutila_l2,
    },
    Subcommand {
        name: "voronoi-gl2",
        about: "GL(2) Voronoi residuals over moduli and scales",
        schema: &[
            THREADS,
            field("q_max", Kind::UInt, "20"),
            field("scales", Kind::FloatList, "200,500,1000"),
            field("alpha", Kind::Float, "0"),
            field("tolerance", Kind::Float, "1e-4"),
        ],
        default_config: include_str!("../configs/voronoi-gl2.cfg"),
        run: voronoi_gl2,
    },
    Subcommand {
        name: "rankin-avg",
        about: "Rankin-Selberg averages, Hecke relations and the Hecke inequality",
        schema: &[
            THREADS,
            field("xs", Kind::UIntList, "1000,10000,100000"),
            field("band_lo", Kind::Float, "0.05"),
            field("band_hi", Kind::Float, "20"),
            field("hecke_tolerance", Kind::Float, "1e-10"),
            field("inequality_q1_max", Kind::UInt, "31"),
            field("inequality_m2_max", Kind::UInt, "1000"),
        ],
        default_config: include_str!("../configs/rankin-avg.cfg"),
        run: rankin_avg,
    },
    Subcommand {
        name: "dh-scaling",
        about: "Exact against approximated shifted convolution across X",
        schema: &[
            THREADS,
            field("xs", Kind::FloatList, "1024,2048,4096,8192"),
            field("hs", Kind::UIntList, "0,1,97"),
            field("delta_exp", Kind::Float, "0.05"),
            field("seed", Kind::UInt, "0"),
        ],
        default_config: include_str!("../configs/dh-scaling.cfg"),
        run: dh_scaling,
    },
    Subcommand {
        name: "dyadic-sharp",
        about: "One dyadic piece with its majorant, and the split census",
        schema: &[
            THREADS,
            field("x", Kind::Float, "500"),
            field("h", Kind::UInt, "1"),
            field("delta_exp", Kind::Float, "0.05"),
            field("m_anchor", Kind::UInt, "16"),
            field("n_cap", Kind::UInt, "3"),
            field("q2", Kind::UInt, "11"),
            field("alpha", Kind::Float, "0"),
            field("minus_kernel", Kind::Bool, "false"),
            field("split_x", Kind::Float, "30000"),
            field("split_q1", Kind::UIntList, "2,4,8"),
            field("split_n_cap", Kind::UInt, "2"),
        ],
        default_config: include_str!("../configs/dyadic-sharp.cfg"),
        run: dyadic_sharp,
    },
];

pub fn find(name: &str) -> Option<&'static Subcommand> {
    SUBCOMMANDS.iter().find(|s| s.name == name)
}

fn max_ratio(r: &ExperimentReport, keep: impl Fn(&Record) -> bool) -> f64 {
    r.records.iter().filter(|x| keep(x)).map(|x| x.ratio).fold(0.0, f64::max)
}

fn all_finite(r: &ExperimentReport) -> bool {
    r.records.iter().all(|x| x.value.is_finite() && x.ratio.is_finite())
}

fn charsum_census(cfg: &Config, log: &dyn Fn(&str)) -> CmdResult {
    let primes = cfg.nonempty_uints("primes")?.to_vec();
    if primes.len() < 2 {
        return Err(ConfigError::field("primes", "need at least two primes").into());
    }
    let family = CensusFamily::S {
        primes,
        m2: (cfg.int("m2_min"), cfg.int("m2_max")),
        n: (cfg.int("n_min"), cfg.int("n_max")),
        h: (cfg.int("h_min"), cfg.int("h_max")),
    };
    log("S census");
    let s = bound_census(&family, Normalizer::SquareRootS)?.with_provenance(cfg.hash());
    if s.is_empty() {
        return Err(ConfigError::field("primes", "ranges select no tuples").into());
    }
    log("Weil check");
    let mut recs = Vec::new();
    for p in primes_up_to(cfg.uint("weil_max_prime")) {
        // every S(a, b; p) with a, b units
        let worst = (1..p as i64)
            .map(|b| kloosterman_row::<f64>(b, p)[1..].iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .fold(0.0f64, f64::max);
        recs.push(Record::new(vec![("p", p as f64)], worst, 2.0 * (p as f64).sqrt()));
    }
    let weil = ExperimentReport::new("weil", recs).with_provenance(cfg.hash());
    let gates = vec![
        Gate::at_most("s-ceiling", s.summary.max_ratio, cfg.float("ceiling")),
        Gate::at_most("weil", max_ratio(&weil, |_| true), 1.0 + 1e-9),
    ];
    Ok(Outcome { reports: vec![s, weil], gates })
}

fn t_identity(cfg: &Config, log: &dyn Fn(&str)) -> CmdResult {
    let q1 = cfg.nonempty_uints("q1_primes")?;
    let q2 = cfg.nonempty_uints("q2_primes")?;
    log("CRT identity census");
    let r = crt_identity_census(q1, q2, cfg.uint("per_triple") as usize, cfg.uint("seed"))?
        .with_provenance(cfg.hash());
    if r.is_empty() {
        return Err(ConfigError::field("q1_primes", "no admissible prime triples").into());
    }
    let worst = max_ratio(&r, |_| true);
    let gates = vec![Gate::at_most("residual", worst, cfg.float("tolerance"))];
    Ok(Outcome { reports: vec![r], gates })
}

fn bound_census_cmd(cfg: &Config, log: &dyn Fn(&str)) -> CmdResult {
    let q1 = cfg.nonempty_uints("q1_primes")?.to_vec();
    let q2 = cfg.nonempty_uints("q2_primes")?.to_vec();
    let grid = TupleSource::Grid { n: cfg.ints("n").to_vec(), m: cfg.ints("m").to_vec(), h: cfg.ints("h").to_vec() };
    let ceiling = cfg.float("ceiling");
    let tol = cfg.float("zero_tolerance");
    let mut gates = Vec::new();
    let mut reports = Vec::new();
    // the diagonal ratio is reported but not gated: its shape is not uniform
    // at these sizes, only its vanishing law is checked
    for (family, nz, label, ceiling) in [
        (
            CensusFamily::TOffDiagonal { q1_primes: q1.clone(), q2_primes: q2.clone(), tuples: grid.clone() },
            Normalizer::TOffDiagonal,
            "offdiag",
            Some(ceiling),
        ),
        (
            CensusFamily::TDiagonal { q1_primes: q1.clone(), q2_primes: q2.clone(), tuples: grid.clone() },
            Normalizer::TDiagonal,
            "diag",
            None,
        ),
    ] {
        log(&format!("T census ({label})"));
        let r = bound_census(&family, nz)?.with_provenance(cfg.hash());
        let expect_zero = |x: &Record| x.param("expect_zero") == Some(1.0);
        if let Some(c) = ceiling {
            gates.push(Gate::at_most(&format!("{label}-ceiling"), max_ratio(&r, |x| !expect_zero(x)), c));
        }
        // vanishing is judged against the number of terms, not the bound shape
        let leak = r
            .records
            .iter()
            .filter(|x| expect_zero(x))
            .map(|x| x.value / x.param("term_count").unwrap_or(1.0))
            .fold(0.0, f64::max);
        gates.push(Gate::at_most(&format!("{label}-vanishing"), leak, tol));
        reports.push(r);
    }
    let as_q1 = PrimeModulus::new(cfg.uint("as_q1")).map_err(|e| ConfigError::field("as_q1", e.to_string()))?;
    let mut recs = Vec::new();
    for &p in cfg.uints("as_q2_primes") {
        log(&format!("two-variable census mod {p}"));
        let q = PrimeModulus::new(p).map_err(|e| ConfigError::field("as_q2_primes", e.to_string()))?;
        let c = adolphson_sperber_census(as_q1, q)?;
        let (h, n, m2) = c.generic_argmax;
        recs.push(Record::new(
            vec![("q2", p as f64), ("argmax_h", h as f64), ("argmax_n", n as f64), ("argmax_m2", m2 as f64), ("degenerate_max", c.degenerate_max), ("tuples", c.tuples as f64)],
            c.generic_max,
            1.0,
        ));
    }
    if !recs.is_empty() {
        let r = ExperimentReport::new("as-census", recs).with_provenance(cfg.hash());
        let deg = r.records.iter().filter_map(|x| x.param("degenerate_max")).fold(0.0, f64::max);
        gates.push(Gate::at_most("as-generic", r.summary.max_ratio, cfg.float("as_ceiling")));
        gates.push(Gate::at_most("as-degenerate", deg, cfg.float("as_ceiling")));
        reports.push(r);
    }
    Ok(Outcome { reports, gates })
}

fn jutila_l2(cfg: &Config, log: &dyn Fn(&str)) -> CmdResult {
    let h = cfg.int("h");
    let mut points = Vec::new();
    for &q1 in cfg.nonempty_uints("q1_anchors")? {
        for &q2 in cfg.nonempty_uints("q2_anchors")? {
            let set = build_moduli_set(q1, q2, h)?;
            let q = set.max_modulus() as f64;
            let mut deltas: Vec<f64> = cfg.floats("delta_powers").iter().map(|p| q.powf(-p)).collect();
            deltas.extend_from_slice(cfg.floats("deltas"));
            for delta in deltas {
                // surfaces DeltaOutOfRange before any work
                Approximant::new(set.clone(), delta)?;
                points.push(L2CensusPoint { big_q1: q1, big_q2: q2, delta });
            }
        }
    }
    if points.is_empty() {
        return Err(ConfigError::field("delta_powers", "no deltas given").into());
    }
    log(&format!("L2 census over {} points", points.len()));
    let census = l2_census(&points, h)?.with_provenance(cfg.hash());
    let mut a0 = 0.0f64;
    for p in &points {
        let a = Approximant::new(build_moduli_set(p.big_q1, p.big_q2, h)?, p.delta)?;
        a0 = a0.max((fourier_coeff(&a, 0) - 1.0).abs());
    }

    log("direct quadrature check");
    let set = ModuliSet::custom(cfg.nonempty_uints("direct_moduli")?)?;
    let delta = cfg.float("direct_delta");
    let a = Approximant::new(set, delta)?;
    let parseval = l2_error(&a, (64.0 / delta).ceil() as u64)?;
    let direct = l2_error_direct(&a);
    let rel = (parseval.partial - direct).abs() / direct;
    // the partial sum undershoots and partial + tail bound overshoots
    let slack = 1e-12 * direct.max(1.0);
    let bracketed = parseval.partial <= direct + slack && direct <= parseval.total() + slack;
    let check = ExperimentReport::new(
        "jutila-direct",
        vec![Record::new(vec![("delta", delta), ("partial", parseval.partial), ("tail", parseval.tail)], direct, 1.0)],
    )
    .with_provenance(cfg.hash());
    let gates = vec![
        Gate::at_most("l2-ceiling", census.summary.max_ratio, cfg.float("ceiling")),
        Gate::at_most("zero-mode", a0, 1e-12),
        Gate::at_most("direct-agreement", rel, cfg.float("direct_tolerance")),
        Gate::new("direct-bracket", bracketed, format!("{:.9} <= {direct:.9} <= {:.9}", parseval.partial, parseval.total())),
    ];
    Ok(Outcome { reports: vec![census, check], gates })
}

/// A unit near `q / 3`, so residues vary with `q`.
fn sample_unit(q: u64) -> i64 {
    (q as i64 / 3..).find(|&a| gcd_signed(a, q) == 1).expect("units exist")
}

fn voronoi_gl2(cfg: &Config, log: &dyn Fn(&str)) -> CmdResult {
    let scales = cfg.nonempty_floats("scales")?;
    if let Some(bad) = scales.iter().find(|&&y| y < 1.0) {
        return Err(ConfigError::field("scales", format!("scale {bad} is below 1")).into());
    }
    let q_max = cfg.uint("q_max");
    if q_max == 0 {
        return Err(ConfigError::field("q_max", "must be at least 1").into());
    }
    let alpha = cfg.float("alpha");
    let mut duals = Vec::new();
    for &y in scales {
        log(&format!("dual transforms at Y = {y}"));
        let w = WeightFunctionSpec::w(y, -alpha);
        for q in 1..=q_max {
            duals.push((q, y, Gl2Dual::new(q, &w, GL2_WEIGHT, GL2_DUAL_CUTOFF)?));
        }
    }
    let need = duals
        .iter()
        .map(|(_, y, d)| d.cutoff().max((3.0 * y).floor() as usize))
        .max()
        .unwrap_or(1);
    let table = build_gl2_table::<f64>(GL2_WEIGHT, need)?;
    let mut recs = Vec::new();
    for (q, y, d) in &duals {
        let a = sample_unit(*q);
        let r = d.residual(a, &table)?;
        recs.push(Record::new(vec![("q", *q as f64), ("a", a as f64), ("Y", *y), ("terms", d.cutoff() as f64)], r, 1.0));
    }
    let r = ExperimentReport::new("voronoi-gl2", recs).with_provenance(cfg.hash());
    let gates = vec![Gate::at_most("residual", r.summary.max_ratio, cfg.float("tolerance"))];
    Ok(Outcome { reports: vec![r], gates })
}

fn rankin_avg(cfg: &Config, log: &dyn Fn(&str)) -> CmdResult {
    let xs = cfg.nonempty_uints("xs")?;
    if xs.contains(&0) {
        return Err(ConfigError::field("xs", "x must be positive").into());
    }
    let q1_max = cfg.uint("inequality_q1_max");
    let m2_max = cfg.uint("inequality_m2_max");
    let len = xs.iter().copied().max().unwrap_or(1).max(q1_max * m2_max) as usize;
    log(&format!("coefficient tables to {len}"));
    let tables = Tables::build(len, len)?;
    let mut recs = Vec::new();
    for &x in xs {
        let gl3 = rankin_selberg_average(&tables.gl3, x as usize)?;
        let gl2 = tables.gl2.rankin_selberg_average(x as usize)?;
        recs.push(Record::new(vec![("x", x as f64), ("gl2_average", gl2)], gl3, 1.0));
    }
    let r = ExperimentReport::new("rankin-avg", recs).with_provenance(cfg.hash());
    let (lo, hi) = (cfg.float("band_lo"), cfg.float("band_hi"));
    let in_band = r.records.iter().all(|x| x.value > lo && x.value < hi);
    let hecke = tables.gl2.hecke_residual();
    log("Hecke inequality");
    let mut checked = 0u64;
    let mut failed = 0u64;
    for q1 in primes_up_to(q1_max) {
        let p = PrimeModulus::new(q1)?;
        for m2 in 1..=m2_max {
            checked += 1;
            if !hecke_inequality_check(&tables.gl3, p, m2)? {
                failed += 1;
            }
        }
    }
    let gates = vec![
        Gate::new("band", in_band, format!("averages within ({lo}, {hi})")),
        Gate::at_most("hecke-relations", hecke, cfg.float("hecke_tolerance")),
        Gate::new("hecke-inequality", failed == 0, format!("{failed} of {checked} pairs fail")),
    ];
    Ok(Outcome { reports: vec![r], gates })
}

fn dh_scaling(cfg: &Config, log: &dyn Fn(&str)) -> CmdResult {
    let xs = cfg.nonempty_floats("xs")?;
    let hs = cfg.nonempty_uints("hs")?;
    let dexp = cfg.float("delta_exp");
    let x_max = xs.iter().copied().fold(0.0, f64::max);
    let h_max = hs.iter().copied().max().unwrap_or(0);
    log(&format!("tables covering X = {x_max}, h = {h_max}"));
    let tables = Tables::covering(x_max, h_max)?;
    let mut cfgs = Vec::new();
    for &h in hs {
        for &x in xs {
            cfgs.push(ExperimentConfig::new(x, h, dexp, tables.clone())?.with_seed(cfg.uint("seed")));
        }
    }
    log(&format!("{} configurations", cfgs.len()));
    let r = error_scaling(&cfgs)?;
    let gates = vec![Gate::new("finite", all_finite(&r), format!("{} records", r.records.len()))];
    Ok(Outcome { reports: vec![r], gates })
}

fn dyadic_sharp(cfg: &Config, log: &dyn Fn(&str)) -> CmdResult {
    let x = cfg.float("x");
    let h = cfg.uint("h");
    let dexp = cfg.float("delta_exp");
    let m = cfg.uint("m_anchor");
    let n_cap = cfg.uint("n_cap");
    let q2 = PrimeModulus::new(cfg.uint("q2")).map_err(|e| ConfigError::field("q2", e.to_string()))?;
    let tables = Tables::covering(x, h)?;
    let tables = if tables.gl3.len() < 2 * m as usize || tables.gl2.len() < n_cap as usize {
        Tables::build(tables.gl3.len().max(2 * m as usize), tables.gl2.len().max(n_cap as usize))?
    } else {
        tables
    };
    let ecfg = ExperimentConfig::new(x, h, dexp, tables)?;
    let mut spec = SharpSpec::new(m, n_cap, q2, cfg.float("alpha"));
    if cfg.flag("minus_kernel") {
        spec.sign = GSign::Minus;
    }
    log("dyadic piece");
    let e = dyadic_sharp_eval(&ecfg, &spec)?;
    let violations = e.diagonal.violations + e.off_diagonal.violations;
    let piece = ExperimentReport::new(
        "dyadic-sharp",
        vec![Record::new(
            vec![
                ("X", x),
                ("h", h as f64),
                ("M", m as f64),
                ("q2", q2.get() as f64),
                ("re", e.value.re),
                ("im", e.value.im),
                ("majorant", e.majorant),
                ("diag_allowed", e.diagonal.allowed as f64),
                ("diag_nonzero", e.diagonal.nonzero as f64),
                ("offdiag_allowed", e.off_diagonal.allowed as f64),
                ("offdiag_nonzero", e.off_diagonal.nonzero as f64),
                ("violations", violations as f64),
            ],
            e.value.norm(),
            e.bound_shape,
        )],
    )
    .with_extra("majorant_ratio", e.majorant_ratio())
    .with_provenance(ecfg.hash());
    let mut gates = vec![
        Gate::new("vanishing", violations == 0, format!("{violations} non-zero terms the laws forbid")),
        Gate::new(
            "finite",
            e.value.norm().is_finite() && e.majorant.is_finite(),
            format!("|value| = {:.6e}, majorant = {:.6e}", e.value.norm(), e.majorant),
        ),
    ];
    let mut reports = vec![piece];
    let split = cfg.uints("split_q1");
    if !split.is_empty() {
        let sx = cfg.float("split_x");
        let sn = cfg.uint("split_n_cap");
        let big_m = sx.powf(0.5 + 3.0 * dexp).floor() as usize;
        log("optimal split census");
        let t = Tables::build(2 * big_m + 1, sn as usize)?;
        let r = optimal_split_census(sx, h, dexp, split, sn, &t)?.with_provenance(cfg.hash());
        gates.push(Gate::new("split-finite", all_finite(&r), format!("{} splits", r.records.len())));
        reports.push(r);
    }
    Ok(Outcome { reports, gates })
}
