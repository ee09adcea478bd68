use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use elliptic_rmt::concentration::{
    binomial_std_err, estimate_concentration, gaussian_truncated_second_moment, petrov_bound,
    rademacher_truncated_second_moment, sample_weighted_sum, WeightedSumSpec,
};
use elliptic_rmt::elliptic::{EllipticLaw, EllipticReport};
use elliptic_rmt::ensemble::{sample_matrix, CorrelatedPairDistribution, PairFamily};
use elliptic_rmt::geometry::{classify, sparse_budget, spread_set, ClassParams, Sparsity};
use elliptic_rmt::potential::{log_potential, min_sv_tail_experiment};
use elliptic_rmt::seeding::stream_rng;
use elliptic_rmt::spectra::{
    eigenvalues, read_eigenvalues_csv, shifted_singular_esd, write_eigenvalues_csv, write_singular_values_csv,
};
use elliptic_rmt::{Complex, Error};
use rand::seq::index::sample as sample_indices;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    ConcentrationArgs, EllipticArgs, Format, GeometryArgs, LogpotArgs, SampleArgs, SnTailArgs, SpectrumArgs,
    SpectrumKind,
};
use crate::config::RunConfig;
use crate::failure::Failure;

const SCHEMA_VERSION: u32 = 1;

pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::usage(e.to_string()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Writes a JSON report if an output path was requested. CSV is not offered for reports.
fn emit_report<T: Serialize>(path: Option<&Path>, format: Format, report: &T) -> Result<(), Failure> {
    match (path, format) {
        (Some(p), Format::Json) => write_json(p, report),
        (Some(_), Format::Csv) => Err(Failure::usage("this subcommand writes JSON reports only")),
        (None, _) => Ok(()),
    }
}

fn path_value(path: Option<&Path>) -> Value {
    path.map_or(Value::Null, |p| Value::String(p.display().to_string()))
}

pub fn sample(ctx: &Context, args: &SampleArgs) -> Result<Value, Failure> {
    let spec = ctx.config.ensemble(&args.ensemble, None)?;
    let x = sample_matrix::<f64>(&spec, ctx.seed)?;
    let m = x.shifted()?;
    let (path, format) = ctx.config.output(&args.output, Format::Csv);
    if let Some(p) = &path {
        let mut out = create(p)?;
        match format {
            Format::Csv => {
                for row in m.row_iter() {
                    let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    writeln!(out, "{}", cells.join(","))?;
                }
            }
            Format::Json => {
                let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
                let doc = json!({
                    "schema_version": SCHEMA_VERSION,
                    "n": spec.n,
                    "seed": ctx.seed,
                    "ensemble": spec.describe(),
                    "shift": spec.shift.describe(),
                    "entries": rows,
                });
                serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Failure::usage(e.to_string()))?;
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;
    }
    let n = spec.n as f64;
    Ok(json!({
        "command": "sample",
        "schema_version": SCHEMA_VERSION,
        "n": spec.n,
        "seed": ctx.seed,
        "ensemble": spec.describe(),
        "shift": spec.shift.describe(),
        "frobenius_sq_over_n2": x.entries.norm_squared() / (n * n),
        "out": path_value(path.as_deref()),
    }))
}

pub fn spectrum(ctx: &Context, args: &SpectrumArgs) -> Result<Value, Failure> {
    let spec = ctx.config.ensemble(&args.ensemble, None)?;
    let cmd = &ctx.config.command;
    let kind = args.kind.or(cmd.kind).unwrap_or(SpectrumKind::Eigen);
    let x = sample_matrix::<f64>(&spec, ctx.seed)?;
    let m = x.shifted()?;
    let (path, format) = ctx.config.output(&args.output, Format::Csv);
    let mut summary = json!({
        "command": "spectrum",
        "schema_version": SCHEMA_VERSION,
        "n": spec.n,
        "seed": ctx.seed,
        "ensemble": spec.describe(),
        "out": path_value(path.as_deref()),
    });
    match kind {
        SpectrumKind::Eigen => {
            let s = eigenvalues(&m).map_err(|e| e.with_seed(ctx.seed))?;
            if let Some(p) = &path {
                match format {
                    Format::Csv => {
                        let mut out = create(p)?;
                        write_eigenvalues_csv(&mut out, &s)?;
                        out.flush()?;
                    }
                    Format::Json => {
                        let values: Vec<[f64; 2]> = s.values.iter().map(|l| [l.re, l.im]).collect();
                        write_json(p, &json!({"schema_version": SCHEMA_VERSION, "kind": "eigen", "n": s.n, "values": values}))?;
                    }
                }
            }
            summary["kind"] = json!("eigen");
            summary["rows"] = json!(s.values.len());
            summary["max_modulus"] = json!(s.max_modulus());
        }
        SpectrumKind::Singular => {
            let z = Complex::new(args.z_re.or(cmd.z_re).unwrap_or(0.0), args.z_im.or(cmd.z_im).unwrap_or(0.0));
            let s = shifted_singular_esd(&m, z).map_err(|e| e.with_seed(ctx.seed))?;
            if let Some(p) = &path {
                match format {
                    Format::Csv => {
                        let mut out = create(p)?;
                        write_singular_values_csv(&mut out, &s)?;
                        out.flush()?;
                    }
                    Format::Json => write_json(
                        p,
                        &json!({"schema_version": SCHEMA_VERSION, "kind": "singular", "n": s.n, "z_re": z.re, "z_im": z.im, "values": s.values}),
                    )?,
                }
            }
            summary["kind"] = json!("singular");
            summary["rows"] = json!(s.values.len());
            summary["z_re"] = json!(z.re);
            summary["z_im"] = json!(z.im);
            summary["s_1"] = json!(s.largest());
            summary["s_n"] = json!(s.smallest());
        }
    }
    Ok(summary)
}

pub fn elliptic_check(ctx: &Context, args: &EllipticArgs) -> Result<Value, Failure> {
    let cmd = &ctx.config.command;
    let dilation = args.dilation.or(cmd.dilation).unwrap_or(1.05);
    if dilation.is_nan() || dilation < 1.0 {
        return Err(Failure::usage(format!("--dilation must be at least 1, got {dilation}")));
    }
    let input = args.input.clone().or_else(|| cmd.input.clone());
    let (spectrum, rho, seed) = match &input {
        Some(p) => {
            let file = File::open(p).map_err(|e| Failure::usage(format!("cannot open {}: {e}", p.display())))?;
            let rho = args
                .ensemble
                .rho
                .or(ctx.config.ensemble.as_ref().map(|e| e.rho))
                .unwrap_or(0.0);
            (read_eigenvalues_csv(BufReader::new(file))?, rho, None)
        }
        None => {
            let spec = ctx.config.ensemble(&args.ensemble, None)?;
            let x = sample_matrix::<f64>(&spec, ctx.seed)?;
            let s = eigenvalues(&x.shifted()?).map_err(|e| e.with_seed(ctx.seed))?;
            (s, spec.pair.rho(), Some(ctx.seed))
        }
    };
    let law = EllipticLaw::new(rho)?;
    let report = EllipticReport::new(&spectrum, &law, dilation);
    let mut value = serde_json::to_value(&report).map_err(|e| Failure::usage(e.to_string()))?;
    if spectrum.values.is_empty() {
        for key in ["fraction_inside", "fraction_inside_1.00", "fraction_inside_1.05", "ks_real", "ks_imag"] {
            value[key] = Value::Null;
        }
    }
    let (path, format) = ctx.config.output(&args.output, Format::Json);
    emit_report(path.as_deref(), format, &value)?;
    value["command"] = json!("elliptic-check");
    value["seed"] = json!(seed);
    value["input"] = path_value(input.as_deref());
    Ok(value)
}

pub fn sn_tail(ctx: &Context, args: &SnTailArgs) -> Result<Value, Failure> {
    let cmd = &ctx.config.command;
    let spec = ctx.config.ensemble(&args.ensemble, Some(0.5))?;
    let trials = args.trials.or(cmd.trials).unwrap_or(1000);
    let b = args.b.or(cmd.b).unwrap_or(3.0);
    let report = min_sv_tail_experiment(&spec, trials, b, ctx.seed)?;
    let (path, format) = ctx.config.output(&args.output, Format::Json);
    emit_report(path.as_deref(), format, &report)?;
    let mut value = serde_json::to_value(&report).map_err(|e| Failure::usage(e.to_string()))?;
    value["command"] = json!("sn-tail");
    Ok(value)
}

pub fn logpot(ctx: &Context, args: &LogpotArgs) -> Result<Value, Failure> {
    let cmd = &ctx.config.command;
    let spec = ctx.config.ensemble(&args.ensemble, None)?;
    let z = Complex::new(args.z_re.or(cmd.z_re).unwrap_or(0.5), args.z_im.or(cmd.z_im).unwrap_or(0.0));
    let x = sample_matrix::<f64>(&spec, ctx.seed)?;
    let r = log_potential(&x.shifted()?, z).map_err(|e| e.with_seed(ctx.seed))?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "n": r.n,
        "seed": ctx.seed,
        "ensemble": spec.describe(),
        "z_re": r.z_re,
        "z_im": r.z_im,
        "u_eigs": r.u_eigs,
        "u_svals": r.u_svals,
        "discrepancy": r.discrepancy(),
    });
    let (path, format) = ctx.config.output(&args.output, Format::Json);
    emit_report(path.as_deref(), format, &value)?;
    let mut summary = value;
    summary["command"] = json!("logpot");
    Ok(summary)
}

pub fn concentration(ctx: &Context, args: &ConcentrationArgs) -> Result<Value, Failure> {
    let cmd = &ctx.config.command;
    let family = args
        .family
        .map(PairFamily::from)
        .or(cmd.family)
        .or(ctx.config.ensemble.as_ref().map(|e| e.family))
        .unwrap_or(PairFamily::Gaussian);
    let terms = args.terms.or(cmd.terms).unwrap_or(100);
    let samples = args.samples.or(cmd.samples).unwrap_or(100_000);
    let lambda = args.lambda.or(cmd.lambda).unwrap_or(0.1);
    if terms == 0 {
        return Err(Failure::usage("--terms must be positive"));
    }
    let (pair, truncated): (CorrelatedPairDistribution, fn(f64, f64) -> f64) = match family {
        PairFamily::Gaussian => (CorrelatedPairDistribution::gaussian(0.0)?, gaussian_truncated_second_moment),
        PairFamily::Rademacher => (CorrelatedPairDistribution::rademacher(0.0)?, rademacher_truncated_second_moment),
        PairFamily::DiscreteCustom => {
            return Err(Failure::usage("concentration supports the gaussian and rademacher families"));
        }
    };
    let weight = 1.0 / (terms as f64).sqrt();
    let spec = WeightedSumSpec::new(vec![weight; terms], None, pair)?;
    let draws = sample_weighted_sum::<f64>(&spec, samples, ctx.seed);
    let estimate = estimate_concentration(&draws, lambda)?;
    let variances = vec![weight * weight; terms];
    let moments = vec![truncated(weight, lambda / 2.0); terms];
    let bound = petrov_bound(&variances, &moments, lambda)?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "lambda": lambda,
        "q_hat": estimate.q_hat,
        "n_samples": estimate.n_samples,
        "std_err": binomial_std_err(estimate.q_hat, estimate.n_samples),
        "bound": bound,
        "bound_applicable": bound.is_some(),
        "family": match family { PairFamily::Gaussian => "gaussian", _ => "rademacher" },
        "terms": terms,
        "seed": ctx.seed,
    });
    let (path, format) = ctx.config.output(&args.output, Format::Json);
    emit_report(path.as_deref(), format, &value)?;
    let mut summary = value;
    summary["command"] = json!("concentration");
    Ok(summary)
}

fn read_vector(path: &Path) -> Result<Vec<f64>, Failure> {
    let file = File::open(path).map_err(|e| Failure::usage(format!("cannot open {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        for field in line.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| Failure::usage(format!("{} line {}: bad number `{field}`", path.display(), i + 1)))?,
            );
        }
    }
    Ok(values)
}

fn random_vector(n: usize, support: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    let mut x = vec![0.0; n];
    for k in sample_indices(&mut rng, n, support).into_vec() {
        x[k] = StandardNormal.sample(&mut rng);
    }
    x
}

pub fn geometry(ctx: &Context, args: &GeometryArgs) -> Result<Value, Failure> {
    let cmd = &ctx.config.command;
    let delta = args.delta.or(cmd.delta).unwrap_or(0.1);
    let r = args.r.or(cmd.r).unwrap_or(0.2);
    let tau = args.tau.or(cmd.tau).unwrap_or(r);
    let input = args.input.clone().or_else(|| cmd.input.clone());
    let (mut x, seed) = match &input {
        Some(p) => (read_vector(p)?, None),
        None => {
            let n = args.n.or(cmd.n).unwrap_or(200);
            let support = args.support.or(cmd.support).unwrap_or(n);
            if n == 0 || support == 0 || support > n {
                return Err(Failure::usage(format!("need 0 < support <= n, got support {support}, n {n}")));
            }
            (random_vector(n, support, ctx.seed), Some(ctx.seed))
        }
    };
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Failure::usage("vector must be non-zero and finite"));
    }
    x.iter_mut().for_each(|v| *v /= norm);
    let params = ClassParams::new(delta, r)?;
    let class = classify(&x, &params)?;
    let spread = match spread_set(&x, delta, tau) {
        Ok(s) => json!({"size": s.indices.len(), "lower": s.lower, "upper": s.upper, "mass": s.mass}),
        Err(Error::InvalidVector(_)) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let tag = match class.tag {
        Sparsity::Sparse => "sparse",
        Sparsity::Compressible => "compressible",
        Sparsity::Incompressible => "incompressible",
    };
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "n": x.len(),
        "delta": delta,
        "r": r,
        "tau": tau,
        "sparse_budget": sparse_budget(delta, x.len()),
        "class": tag,
        "distance_to_sparse": class.distance_to_sparse,
        "spread_set": spread,
        "seed": seed,
        "input": path_value(input.as_deref()),
    });
    let (path, format) = ctx.config.output(&args.output, Format::Json);
    emit_report(path.as_deref(), format, &value)?;
    let mut summary = value;
    summary["command"] = json!("geometry");
    Ok(summary)
}
