use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use pdmd_core::metrics::{chordal_distance, gap_surface_between};
use pdmd_core::pdmd::{fit_pdmd_detailed, SingularSpectrum};
use pdmd_core::plants::ORIGIN_FD_STEP;
use pdmd_core::snapshots::generate_chirp_with_phase;
use pdmd_core::{
    build_lifted_scaled, collect_from_plant, energy_retention, linearize_plant, load_model, load_snapshots,
    relative_rms_error, save_model, save_snapshots, singular_spectrum, Dynamics, GapSurface, PdmdConfig, PlantConfig,
    PolyLpvModel, ReducedModel, Signal, SnapshotEnsemble, SurrogatePlant, ThetaScale, ThetaSource,
};

use crate::grammar::Grid;
use crate::{usage, Cli, Command, CompareArgs, EvalArgs, FitArgs, GenArgs, InputArgs, SimArgs, SvplotArgs, ThetaArgs, X0Args};

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx { seed: cli.seed, out_dir: cli.out_dir.clone(), quiet: cli.quiet };
    match &cli.command {
        Command::Gen(a) => gen(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::Sim(a) => sim(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Compare(a) => compare(&ctx, a),
        Command::Svplot(a) => svplot(&ctx, a),
    }
}

struct Ctx {
    seed: u64,
    out_dir: Option<PathBuf>,
    quiet: bool,
}

impl Ctx {
    /// Resolves an output path against `--out-dir` and creates its parent.
    fn output(&self, path: &Path) -> Result<PathBuf> {
        let full = match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        };
        if let Some(parent) = full.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(full)
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }
}

const INPUT_STREAM: u64 = 1;
const THETA_STREAM: u64 = 2;

/// Input samples (one more than the number of transitions) plus whatever a
/// snapshot file supplied alongside them.
struct Excitation {
    input: Signal<f64>,
    file: Option<SnapshotEnsemble<f64>>,
}

impl Excitation {
    fn steps(&self) -> usize {
        self.input.len() - 1
    }
}

fn same_dt(a: f64, b: f64) -> bool {
    ((a - b) / b).abs() <= 1e-9
}

fn excitation(ctx: &Ctx, args: &InputArgs, dt: f64, n_u: usize) -> Result<Excitation> {
    let bias = DVector::from_element(n_u, args.offset);
    if let Some(c) = args.chirp {
        if !same_dt(c.dt, dt) {
            return Err(usage(format!("chirp dt {} differs from the model/plant dt {dt}", c.dt)));
        }
        let s = generate_chirp_with_phase::<f64>(c.f0, c.f1, c.duration, dt, args.amp, args.phase)?;
        let samples = s.samples().iter().map(|v| DVector::from_element(n_u, v[0])).collect();
        let input = Signal::new(dt, samples)?.offset(&bias)?;
        return Ok(Excitation { input, file: None });
    }
    if let Some(steps) = args.random {
        if steps == 0 {
            return Err(usage("--random needs at least one step"));
        }
        let mut r = ctx.rng(INPUT_STREAM);
        let samples = (0..=steps)
            .map(|_| DVector::from_fn(n_u, |_, _| args.amp * r.sample::<f64, _>(StandardNormal)))
            .collect();
        let input = Signal::new(dt, samples)?.offset(&bias)?;
        return Ok(Excitation { input, file: None });
    }
    if let Some(path) = &args.input {
        let ens = load_snapshots::<f64>(path)?;
        if !same_dt(ens.dt(), dt) {
            return Err(usage(format!("{} has dt {} but the model/plant has dt {dt}", path.display(), ens.dt())));
        }
        if ens.n_u() != n_u {
            return Err(pdmd_core::Error::DimensionMismatch(format!(
                "{} has {} inputs, expected {n_u}",
                path.display(),
                ens.n_u()
            ))
            .into());
        }
        let mut samples = ens.inputs().to_vec();
        samples.push(samples[samples.len() - 1].clone());
        let input = Signal::new(dt, samples)?.offset(&bias)?;
        return Ok(Excitation { input, file: Some(ens) });
    }
    Err(usage("no input given: pass --chirp, --random or --input"))
}

fn random_theta(ctx: &Ctx, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut r = ctx.rng(THETA_STREAM);
    (0..n).map(|_| if lo == hi { lo } else { r.random_range(lo..=hi) }).collect()
}

/// Theta source for simulating a plant with `n_x` states.
fn plant_theta(ctx: &Ctx, args: &ThetaArgs, exc: &Excitation, n_x: usize) -> Result<ThetaSource<f64>> {
    if let Some(v) = args.theta {
        return Ok(ThetaSource::Fixed(v));
    }
    if let Some(rule) = args.theta_rule {
        return Ok(ThetaSource::Rule(rule.resolve(n_x).map_err(usage)?));
    }
    if let Some(r) = args.theta_random {
        return Ok(ThetaSource::Sequence(random_theta(ctx, r.lo, r.hi, exc.steps())));
    }
    if let Some(ens) = &exc.file {
        return Ok(ThetaSource::Sequence(ens.theta().to_vec()));
    }
    Err(usage("no theta given: pass --theta, --theta-rule or --theta-random"))
}

fn read_x0(args: &X0Args) -> Result<Option<DVector<f64>>> {
    if let Some(v) = &args.x0 {
        return Ok(Some(DVector::from_vec(v.0.clone())));
    }
    if let Some(path) = &args.x0_from {
        let ens = load_snapshots::<f64>(path)?;
        return Ok(ens.states().last().cloned());
    }
    Ok(None)
}

fn load_plant(ctx: &Ctx, path: &Path) -> Result<SurrogatePlant<f64>> {
    Ok(PlantConfig::load(path)?.build::<f64>(ctx.seed)?)
}

fn gen(ctx: &Ctx, a: &GenArgs) -> Result<()> {
    let plant = load_plant(ctx, &a.plant)?;
    let exc = excitation(ctx, &a.input, plant.dt(), plant.n_u())?;
    let theta = plant_theta(ctx, &a.theta, &exc, plant.n_x())?;
    let x0 = read_x0(&a.x0)?.unwrap_or_else(|| DVector::zeros(plant.n_x()));
    let ens = pdmd_core::snapshots::collect_from_plant_bounded(&plant, &exc.input, &x0, &theta, a.bound)?;
    let out = ctx.output(&a.out)?;
    save_snapshots(&ens, &out)?;
    info!("wrote {} transitions of a {}-state plant to {}", ens.len(), ens.n_x(), out.display());
    ctx.say(format!("N_d={} n_x={} n_u={} -> {}", ens.len(), ens.n_x(), ens.n_u(), out.display()));
    Ok(())
}

fn write_spectrum(path: &Path, sp: &SingularSpectrum<f64>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "index,regressor_sv,shifted_sv,shifted_retention")?;
    let n = sp.regressor_sv.len().max(sp.shifted_sv.len());
    let cell = |v: Option<&f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for i in 0..n {
        let retention = if i < sp.shifted_sv.len() { energy_retention(&sp.shifted_sv, i + 1).ok() } else { None };
        writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            cell(sp.regressor_sv.get(i)),
            cell(sp.shifted_sv.get(i)),
            cell(retention.as_ref())
        )?;
    }
    out.flush()?;
    Ok(())
}

fn fit(ctx: &Ctx, a: &FitArgs) -> Result<()> {
    let ens = load_snapshots::<f64>(&a.data)?;
    let cfg = PdmdConfig { n_p: a.n_p, n_z: a.n_z.0, rank_policy: a.rank.0, c: None, normalize_theta: !a.no_normalize };
    let fit = fit_pdmd_detailed(&ens, &cfg)?;
    let out = ctx.output(&a.out)?;
    save_model(&fit.rom, &out)?;
    let sv_out = match &a.sv_out {
        Some(p) => ctx.output(p)?,
        None => {
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
            out.with_file_name(format!("{stem}_sv.csv"))
        }
    };
    write_spectrum(&sv_out, &fit.spectrum)?;
    let n_z = fit.rom.n_z();
    let retention = energy_retention(&fit.spectrum.shifted_sv, n_z)?;
    info!(
        "regressor rank {} of {}, condition number {:.3e}",
        fit.diagnostics.rank,
        fit.diagnostics.regressor_sv.len(),
        fit.diagnostics.condition_number
    );
    ctx.say(format!(
        "n_p={} n_z={} rank={} retention={retention:.6} -> {} ({})",
        a.n_p,
        n_z,
        fit.diagnostics.rank,
        out.display(),
        sv_out.display()
    ));
    Ok(())
}

fn svplot(ctx: &Ctx, a: &SvplotArgs) -> Result<()> {
    let ens = load_snapshots::<f64>(&a.data)?;
    let scale = if a.no_normalize { ThetaScale::identity() } else { ThetaScale::fit(ens.theta())? };
    let sp = singular_spectrum(&build_lifted_scaled(&ens, a.n_p, scale)?);
    let out = ctx.output(&a.out)?;
    write_spectrum(&out, &sp)?;
    ctx.say(format!("{} regressor and {} shifted singular values -> {}", sp.regressor_sv.len(), sp.shifted_sv.len(), out.display()));
    Ok(())
}

/// Maps an initial state of either full or reduced dimension to reduced coordinates.
fn reduced_x0(rom: &ReducedModel<f64>, x0: Option<DVector<f64>>) -> Result<DVector<f64>> {
    match x0 {
        None => Ok(DVector::zeros(rom.n_z())),
        Some(x) if x.len() == rom.n_full() => Ok(rom.project_state(&x)?),
        Some(z) if z.len() == rom.n_z() => Ok(z),
        Some(x) => Err(pdmd_core::Error::DimensionMismatch(format!(
            "initial state has dimension {}, model has {} full and {} reduced states",
            x.len(),
            rom.n_full(),
            rom.n_z()
        ))
        .into()),
    }
}

/// How the model picks theta while it is simulated.
enum RomSchedule {
    Sequence(Vec<f64>),
    Rule(pdmd_core::ArcsinRule<f64>),
}

impl RomSchedule {
    fn label(&self) -> &'static str {
        match self {
            RomSchedule::Sequence(_) => "prescribed",
            RomSchedule::Rule(_) => "state rule",
        }
    }
}

fn simulate_rom(rom: &ReducedModel<f64>, inputs: &[DVector<f64>], z0: &DVector<f64>, schedule: &RomSchedule) -> Result<pdmd_core::Trajectory<f64>> {
    let model = rom.model();
    Ok(match schedule {
        RomSchedule::Sequence(theta) => model.simulate(inputs, &theta[..inputs.len()], z0)?,
        RomSchedule::Rule(rule) => model.simulate_with(inputs, z0, |_, z| rule.eval(&rom.lift_state(z)?))?,
    })
}

fn rom_schedule(ctx: &Ctx, args: &ThetaArgs, exc: &Excitation, rom: &ReducedModel<f64>) -> Result<RomSchedule> {
    Ok(match plant_theta(ctx, args, exc, rom.n_full())? {
        ThetaSource::Fixed(v) => RomSchedule::Sequence(vec![v; exc.steps()]),
        ThetaSource::Rule(rule) => RomSchedule::Rule(rule),
        ThetaSource::Sequence(s) => RomSchedule::Sequence(s),
    })
}

fn sim(ctx: &Ctx, a: &SimArgs) -> Result<()> {
    let rom = load_model::<f64>(&a.model)?;
    let model = rom.model();
    let exc = excitation(ctx, &a.input, model.dt(), model.n_u())?;
    let schedule = rom_schedule(ctx, &a.theta, &exc, &rom)?;
    let z0 = reduced_x0(&rom, read_x0(&a.x0)?)?;
    let inputs = &exc.input.samples()[..exc.steps()];
    let traj = simulate_rom(&rom, inputs, &z0, &schedule)?;
    let out = ctx.output(&a.out)?;
    pdmd_core::lpv::write_trajectory_csv(&out, model.dt(), inputs, &traj)?;
    ctx.say(format!("{} steps, theta {} -> {}", inputs.len(), schedule.label(), out.display()));
    Ok(())
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let rom = load_model::<f64>(&a.model)?;
    let model = rom.model();
    let out = ctx.output(&a.out)?;
    let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write!(w, "theta,re,im,abs")?;
    if a.continuous {
        write!(w, ",re_ct,im_ct")?;
    }
    writeln!(w)?;
    model.warn_outside_range(&a.theta_grid.0);
    let mut unstable = Vec::new();
    for &th in &a.theta_grid.0 {
        let spec = model.eigenvalues_at(th)?;
        if !spec.stable {
            unstable.push(th);
        }
        let ct = if a.continuous { spec.continuous_equivalent(model.dt()) } else { Vec::new() };
        for (i, l) in spec.eigenvalues.iter().enumerate() {
            write!(w, "{th:.16e},{:.16e},{:.16e},{:.16e}", l.re, l.im, l.norm())?;
            if let Some(s) = ct.get(i) {
                write!(w, ",{:.16e},{:.16e}", s.re, s.im)?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    match unstable.first() {
        Some(th) => ctx.say(format!("spectral radius >= 1 first at theta = {th}")),
        None => ctx.say("stable over the whole theta grid"),
    }

    if let Some(omega) = &a.omega_grid {
        let fr_out = ctx.output(&a.fr_out)?;
        let file = File::create(&fr_out).with_context(|| format!("creating {}", fr_out.display()))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "theta,omega,output,input,re,im,mag_db")?;
        for &th in &a.theta_grid.0 {
            for (om, g) in omega.0.iter().zip(responses(model, th, &omega.0)?) {
                for i in 0..model.n_y() {
                    for j in 0..model.n_u() {
                        match &g {
                            Some(g) => {
                                let v = g[(i, j)];
                                let db = 20.0 * v.norm().log10();
                                writeln!(w, "{th:.16e},{om:.16e},{},{},{:.16e},{:.16e},{db:.16e}", i + 1, j + 1, v.re, v.im)?;
                            }
                            None => writeln!(w, "{th:.16e},{om:.16e},{},{},,,", i + 1, j + 1)?,
                        }
                    }
                }
            }
        }
        w.flush()?;
        ctx.say(format!("frequency response -> {}", fr_out.display()));
    }
    ctx.say(format!("eigenvalues -> {}", out.display()));
    Ok(())
}

/// Frequency response at every grid point; `None` where a pole sits on the unit circle.
fn responses(model: &PolyLpvModel<f64>, theta: f64, omega: &[f64]) -> Result<Vec<Option<nalgebra::DMatrix<nalgebra::Complex<f64>>>>> {
    match model.frequency_response(theta, omega) {
        Ok(fr) => Ok(fr.g.into_iter().map(Some).collect()),
        Err(pdmd_core::Error::Singular { .. }) => omega
            .iter()
            .map(|&om| match model.frequency_response(theta, &[om]) {
                Ok(mut fr) => Ok(fr.g.pop()),
                Err(pdmd_core::Error::Singular { .. }) => Ok(None),
                Err(e) => Err(e.into()),
            })
            .collect(),
        Err(e) => Err(e.into()),
    }
}

/// Frozen-theta gap between the plant, linearized at the origin, and the model.
fn plant_gap(plant: &SurrogatePlant<f64>, rom: &ReducedModel<f64>, theta: &Grid, omega: &Grid) -> Result<GapSurface<f64>> {
    if let Some(truth) = plant.as_poly_lpv() {
        return Ok(gap_surface_between(truth, rom.model(), &theta.0, &omega.0)?);
    }
    let n = plant.n_x();
    rom.model().warn_outside_range(&theta.0);
    let mut gap = Vec::with_capacity(theta.0.len());
    for &th in &theta.0 {
        let (a, b) = linearize_plant(plant, &DVector::zeros(n), &DVector::zeros(plant.n_u()), th, ORIGIN_FD_STEP)?;
        let lti = PolyLpvModel::new(vec![a], vec![b], nalgebra::DMatrix::identity(n, n), ThetaScale::identity(), plant.dt())?;
        let truth = responses(&lti, th, &omega.0)?;
        let model = responses(rom.model(), th, &omega.0)?;
        let row = truth
            .iter()
            .zip(&model)
            .map(|(g1, g2)| match (g1, g2) {
                (Some(g1), Some(g2)) => chordal_distance(g1, g2).map(Some),
                _ => Ok(None),
            })
            .collect::<pdmd_core::Result<Vec<_>>>()?;
        gap.push(row);
    }
    Ok(GapSurface { theta: theta.0.clone(), omega: omega.0.clone(), gap })
}

#[derive(Serialize)]
struct Report {
    model_error: f64,
    model_error_percent: f64,
    per_output_error: Vec<Option<f64>>,
    n_steps: usize,
    n_z: usize,
    n_full: usize,
    theta_schedule: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gap_missing_cells: Option<usize>,
}

fn compare(ctx: &Ctx, a: &CompareArgs) -> Result<()> {
    let rom = load_model::<f64>(&a.model)?;
    let model = rom.model();
    if model.n_y() != rom.n_full() {
        return Err(pdmd_core::Error::DimensionMismatch(format!(
            "compare needs every state as an output; model has {} outputs for {} states",
            model.n_y(),
            rom.n_full()
        ))
        .into());
    }
    let plant = a.plant.as_deref().map(|p| load_plant(ctx, p)).transpose()?;
    if a.gap && plant.is_none() {
        return Err(usage("--gap needs --plant"));
    }

    let (truth, schedule) = match (&a.data, &plant) {
        (Some(path), _) => {
            let ens = load_snapshots::<f64>(path)?;
            if !same_dt(ens.dt(), model.dt()) {
                return Err(usage(format!("{} has dt {} but the model has dt {}", path.display(), ens.dt(), model.dt())));
            }
            let mut samples = ens.inputs().to_vec();
            samples.push(samples[samples.len() - 1].clone());
            let exc = Excitation { input: Signal::new(ens.dt(), samples)?, file: Some(ens.clone()) };
            let schedule = rom_schedule(ctx, &a.theta, &exc, &rom)?;
            (ens, schedule)
        }
        (None, Some(plant)) => {
            if plant.n_x() != rom.n_full() {
                return Err(pdmd_core::Error::DimensionMismatch(format!(
                    "plant has {} states, model basis has {}",
                    plant.n_x(),
                    rom.n_full()
                ))
                .into());
            }
            let exc = excitation(ctx, &a.input, plant.dt(), plant.n_u())?;
            let source = plant_theta(ctx, &a.theta, &exc, plant.n_x())?;
            let x0 = read_x0(&a.x0)?.unwrap_or_else(|| DVector::zeros(plant.n_x()));
            let ens = collect_from_plant(plant, &exc.input, &x0, &source)?;
            let schedule = match source {
                ThetaSource::Rule(rule) => RomSchedule::Rule(rule),
                _ => RomSchedule::Sequence(ens.theta().to_vec()),
            };
            (ens, schedule)
        }
        (None, None) => return Err(usage("compare needs --data or --plant")),
    };

    let z0 = rom.project_state(&truth.states()[0])?;
    let traj = simulate_rom(&rom, truth.inputs(), &z0, &schedule)?;
    let model_error = relative_rms_error(truth.states(), &traj.outputs)?;
    let per_output: Vec<Option<f64>> = (0..rom.n_full())
        .map(|i| {
            let pick = |ys: &[DVector<f64>]| ys.iter().map(|y| DVector::from_element(1, y[i])).collect::<Vec<_>>();
            relative_rms_error(&pick(truth.states()), &pick(&traj.outputs)).ok()
        })
        .collect();

    let errors_out = ctx.output(&a.errors_out)?;
    let mut w = BufWriter::new(File::create(&errors_out).with_context(|| format!("creating {}", errors_out.display()))?);
    writeln!(w, "output,relative_rms_error")?;
    for (i, e) in per_output.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, e.map(|v| format!("{v:.16e}")).unwrap_or_default())?;
    }
    w.flush()?;

    if let Some(p) = &a.traj_out {
        let p = ctx.output(p)?;
        pdmd_core::lpv::write_trajectory_csv(&p, model.dt(), truth.inputs(), &traj)?;
    }

    let mut report = Report {
        model_error,
        model_error_percent: 100.0 * model_error,
        per_output_error: per_output,
        n_steps: truth.len(),
        n_z: rom.n_z(),
        n_full: rom.n_full(),
        theta_schedule: schedule.label(),
        gap_max: None,
        gap_missing_cells: None,
    };
    if let (true, Some(plant)) = (a.gap, &plant) {
        let surface = plant_gap(plant, &rom, &a.theta_grid, &a.omega_grid)?;
        let gap_out = ctx.output(&a.gap_out)?;
        surface.write_csv(&gap_out)?;
        report.gap_max = surface.max();
        report.gap_missing_cells = Some(surface.missing_cells());
        ctx.say(format!("max gap {:.3e} -> {}", surface.max().unwrap_or(f64::NAN), gap_out.display()));
    }
    let report_out = ctx.output(&a.report)?;
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(&report_out, text + "\n").with_context(|| format!("writing {}", report_out.display()))?;
    ctx.say(format!("model error {:.3}% over {} steps -> {}", 100.0 * model_error, truth.len(), report_out.display()));
    Ok(())
}
