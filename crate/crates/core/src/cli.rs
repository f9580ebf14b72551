//! Command implementations behind the `giant-gates` binary.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage/config error,
//! 3 numerical failure. All numeric output is deterministic: fixed column
//! order, fixed key order, and round-trip precision (17 significant digits)
//! unless `--digits` lowers it.

use crate::algebra::QutritRegister;
use crate::config::{ModelChoice, OutputFormat, RunConfig};
use crate::couplings::{reference_layout, CouplingLayout};
use crate::dynamics::{build_collapse_ops, evolve, evolve_superop_oracle, LindbladModel, NoiseParams};
use crate::gates::{effective_hamiltonian, ideal_unitary, GateKind, GateSpec};
use crate::linalg::{max_abs, CMatrix, ONE};
use crate::protocols::{
    build_schedule, full_gate_model, ghz3_circuit, ghz5_circuit, ghz_target, noise_sweep_and_fit,
    simulate_circuit, GridSpec, ModelKind, SweepResult, SweepTarget,
};
use crate::tomography::{
    calibrate_virtual_z, computational_submatrix, reconstruct_choi, ChoiMatrix,
};
use crate::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "giant-gates", version, about = "Giant-atom waveguide QED gate simulator")]
struct Cli {
    /// Path to a TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel sweeps (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output format for tabular commands.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Output path (stdout if omitted). `sweep` also writes `<out>.fit.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Simulation model override.
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,

    /// Significant digits in numeric output (1–17).
    #[arg(long, global = true)]
    digits: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate Γ_ind, g, and Γ_coll over a frequency range.
    Couplings {
        /// Range start, in units of ω₀.
        #[arg(long, default_value_t = 1.0)]
        omega_min: f64,
        /// Range end, in units of ω₀.
        #[arg(long, default_value_t = 2.0)]
        omega_max: f64,
        #[arg(long, default_value_t = 1024)]
        samples: usize,
    },
    /// Locate decoherence-free frequencies for every atom.
    DfScan {
        #[arg(long, default_value_t = 1.0)]
        omega_min: f64,
        #[arg(long, default_value_t = 2.0)]
        omega_max: f64,
        /// Acceptance threshold on Γ_ind, relative to γ.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Simulate one gate channel and report fidelities.
    Gate {
        #[arg(value_enum)]
        gate: GateArg,
    },
    /// Dump the Choi matrix of a gate channel.
    Choi {
        #[arg(value_enum)]
        gate: GateArg,
        /// Binary little-endian float64 dump instead of CSV.
        #[arg(long)]
        binary: bool,
    },
    /// Sweep fidelity over the (Γ_ex/g, Γ_φ/g) grid and fit coefficients.
    Sweep {
        #[arg(value_enum)]
        target: TargetArg,
    },
    /// Prepare a GHZ state and report its fidelity.
    Ghz {
        /// Number of atoms (3 or 5).
        n: usize,
    },
    /// Run the validation suite and print a pass/fail table.
    Validate,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum GateArg {
    Cczs,
    Div,
    Iswap,
    Cz,
}

impl GateArg {
    fn kind(self) -> GateKind {
        match self {
            GateArg::Cczs => GateKind::Cczs,
            GateArg::Div => GateKind::Div,
            GateArg::Iswap => GateKind::Iswap,
            GateArg::Cz => GateKind::Cz,
        }
    }

    fn name(self) -> &'static str {
        match self {
            GateArg::Cczs => "cczs",
            GateArg::Div => "div",
            GateArg::Iswap => "iswap",
            GateArg::Cz => "cz",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TargetArg {
    Cczs,
    Div,
    Ghz3,
    Ghz5,
}

impl TargetArg {
    fn target(self) -> SweepTarget {
        match self {
            TargetArg::Cczs => SweepTarget::Cczs,
            TargetArg::Div => SweepTarget::Div,
            TargetArg::Ghz3 => SweepTarget::Ghz3,
            TargetArg::Ghz5 => SweepTarget::Ghz5,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    Effective,
    Full,
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_) => 2,
                Error::Validation(_) => 1,
                _ => 3,
            }
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(f) = cli.format {
        config.output.format = match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    if let Some(m) = cli.model {
        config.model.kind = match m {
            ModelArg::Effective => ModelChoice::Effective,
            ModelArg::Full => ModelChoice::Full,
        };
    }
    if let Some(d) = cli.digits {
        if d == 0 || d > 17 {
            return Err(Error::Config(format!("--digits must be in 1..=17, got {d}")));
        }
        config.output.digits = d;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;

    pool.install(|| dispatch(&cli.command, &config, &cli.out))
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
}

fn dispatch(command: &Command, config: &RunConfig, out: &Option<PathBuf>) -> Result<i32> {
    match command {
        Command::Couplings {
            omega_min,
            omega_max,
            samples,
        } => {
            let text = cmd_couplings(config, *omega_min, *omega_max, *samples)?;
            write_text(out, &text)?;
            Ok(0)
        }
        Command::DfScan {
            omega_min,
            omega_max,
            tol,
        } => {
            let text = cmd_df_scan(config, *omega_min, *omega_max, *tol)?;
            write_text(out, &text)?;
            Ok(0)
        }
        Command::Gate { gate } => {
            let text = cmd_gate(config, *gate)?;
            write_text(out, &text)?;
            Ok(0)
        }
        Command::Choi { gate, binary } => {
            let bytes = cmd_choi(config, *gate, *binary)?;
            write_bytes(out, &bytes)?;
            Ok(0)
        }
        Command::Sweep { target } => {
            let (csv, fit) = cmd_sweep(config, target.target())?;
            match out {
                Some(path) => {
                    std::fs::write(path, csv)?;
                    let mut fit_path = path.clone().into_os_string();
                    fit_path.push(".fit.json");
                    std::fs::write(fit_path, fit)?;
                }
                None => {
                    print!("{csv}");
                    println!("{fit}");
                }
            }
            Ok(0)
        }
        Command::Ghz { n } => {
            let text = cmd_ghz(config, *n)?;
            write_text(out, &text)?;
            Ok(0)
        }
        Command::Validate => {
            let (report, all_pass) = cmd_validate(config)?;
            write_text(out, &report)?;
            Ok(if all_pass { 0 } else { 1 })
        }
    }
}

fn write_text(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn write_bytes(out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn num(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits - 1, x)
}

/// Deterministic table with CSV and JSON renderings.
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn render(&self, format: OutputFormat, digits: usize) -> String {
        match format {
            OutputFormat::Csv => {
                let mut s = self.columns.join(",");
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|&x| num(x, digits)).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s
            }
            OutputFormat::Json => {
                let cols: Vec<String> =
                    self.columns.iter().map(|c| format!("\"{c}\"")).collect();
                let mut s = format!("{{\"columns\":[{}],\"rows\":[", cols.join(","));
                for (i, row) in self.rows.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    let cells: Vec<String> = row.iter().map(|&x| num(x, digits)).collect();
                    s.push_str(&format!("[{}]", cells.join(",")));
                }
                s.push_str("]}\n");
                s
            }
        }
    }
}

/// Coupling-profile table over [omega_min, omega_max]·ω₀.
pub fn cmd_couplings(
    config: &RunConfig,
    omega_min: f64,
    omega_max: f64,
    samples: usize,
) -> Result<String> {
    if samples < 2 || !(omega_max > omega_min) {
        return Err(Error::InvalidArgument(
            "couplings needs samples >= 2 and omega_max > omega_min".into(),
        ));
    }
    let layout = config.layout()?;
    let n = layout.n_atoms();
    let omega0 = layout.waveguide.omega0();

    let mut columns = vec!["omega_over_omega0".to_string()];
    for k in 1..=n {
        columns.push(format!("gamma_ind_{k}"));
    }
    for j in 1..=n {
        for k in (j + 1)..=n {
            columns.push(format!("g_{j}{k}"));
        }
    }
    for j in 1..=n {
        for k in (j + 1)..=n {
            columns.push(format!("gamma_coll_{j}{k}"));
        }
    }

    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let ratio = omega_min + (omega_max - omega_min) * i as f64 / (samples - 1) as f64;
        let profile = layout.profile(ratio * omega0)?;
        let mut row = vec![ratio];
        row.extend(profile.gamma_ind);
        row.extend(profile.g);
        row.extend(profile.gamma_coll);
        rows.push(row);
    }
    Ok(Table { columns, rows }.render(config.output.format, config.output.digits))
}

/// Decoherence-free frequencies per atom in [omega_min, omega_max]·ω₀.
pub fn cmd_df_scan(
    config: &RunConfig,
    omega_min: f64,
    omega_max: f64,
    tol: f64,
) -> Result<String> {
    let layout = config.layout()?;
    let omega0 = layout.waveguide.omega0();
    let gamma_scale = layout
        .atoms
        .iter()
        .flat_map(|a| a.points.iter().map(|p| p.strength))
        .fold(0.0f64, f64::max);

    let columns = vec![
        "atom".to_string(),
        "omega_over_omega0".to_string(),
        "gamma_ind".to_string(),
    ];
    let mut rows = Vec::new();
    for atom in 0..layout.n_atoms() {
        let freqs = layout.find_df_frequencies(
            atom,
            (omega_min * omega0, omega_max * omega0),
            tol * gamma_scale,
        )?;
        for w in freqs {
            rows.push(vec![
                (atom + 1) as f64,
                w / omega0,
                layout.individual_decay(atom, w)?,
            ]);
        }
    }
    Ok(Table { columns, rows }.render(config.output.format, config.output.digits))
}

struct GateChannel {
    spec: GateSpec,
    register: QutritRegister,
    choi: ChoiMatrix,
    duration: f64,
}

fn gate_channel(config: &RunConfig, kind: GateKind) -> Result<GateChannel> {
    let arity = match kind {
        GateKind::Cczs | GateKind::Div => 3,
        GateKind::Iswap | GateKind::Cz => 2,
    };
    let spec = GateSpec::new(kind, (0..arity).collect(), config.g())?;
    let register = QutritRegister::new(arity);
    let (h, duration) = match config.model_kind() {
        ModelKind::Effective => (effective_hamiltonian(&spec, &register)?, spec.duration()),
        ModelKind::Full { chi_over_g } => full_gate_model(&spec, chi_over_g)?,
    };
    let noise = NoiseParams::uniform(arity, config.gamma_ex(), config.gamma_phi());
    let model = LindbladModel::new(h, build_collapse_ops(&register, &noise)?)?;
    let choi = reconstruct_choi(
        &model,
        duration,
        &register,
        config.solver.reltol,
        config.solver.abstol,
    )?;
    Ok(GateChannel {
        spec,
        register,
        choi,
        duration,
    })
}

/// JSON gate report: duration, process/average fidelity (after virtual-Z
/// calibration), leakage.
pub fn cmd_gate(config: &RunConfig, gate: GateArg) -> Result<String> {
    let channel = gate_channel(config, gate.kind())?;
    let ideal = computational_submatrix(
        &channel.register,
        &ideal_unitary(&channel.spec, &channel.register)?.matrix,
    );
    let cal = calibrate_virtual_z(&channel.choi, &ideal, channel.register.n_atoms)?;
    let d = channel.choi.d;
    let digits = config.output.digits;
    let model = match config.model.kind {
        ModelChoice::Effective => "effective",
        ModelChoice::Full => "full",
    };
    Ok(format!(
        "{{\"gate\":\"{}\",\"model\":\"{model}\",\"duration_s\":{},\"process_fidelity\":{},\"average_fidelity\":{},\"leakage\":{}}}\n",
        gate.name(),
        num(channel.duration, digits),
        num(cal.fidelity, digits),
        num(crate::tomography::average_gate_fidelity(cal.fidelity, d), digits),
        num(channel.choi.leakage(), digits),
    ))
}

/// Choi-matrix dump: CSV rows of `re,im` pairs, or binary little-endian
/// float64 with a 16-byte header (magic `CHOI`, u32 d, 8 reserved bytes).
pub fn cmd_choi(config: &RunConfig, gate: GateArg, binary: bool) -> Result<Vec<u8>> {
    let channel = gate_channel(config, gate.kind())?;
    let m = &channel.choi.matrix;
    let d2 = m.nrows();
    if binary {
        let mut bytes = Vec::with_capacity(16 + d2 * d2 * 16);
        bytes.extend_from_slice(b"CHOI");
        bytes.extend_from_slice(&(channel.choi.d as u32).to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        for i in 0..d2 {
            for j in 0..d2 {
                bytes.extend_from_slice(&m[(i, j)].re.to_le_bytes());
                bytes.extend_from_slice(&m[(i, j)].im.to_le_bytes());
            }
        }
        Ok(bytes)
    } else {
        let digits = config.output.digits;
        let mut s = String::new();
        for i in 0..d2 {
            let cells: Vec<String> = (0..d2)
                .flat_map(|j| [num(m[(i, j)].re, digits), num(m[(i, j)].im, digits)])
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        Ok(s.into_bytes())
    }
}

/// Noise sweep: grid CSV plus a JSON fit summary.
pub fn cmd_sweep(config: &RunConfig, target: SweepTarget) -> Result<(String, String)> {
    let grid = GridSpec {
        max_ratio: config.sweep.max_ratio,
        points_per_axis: config.sweep.points_per_axis,
    };
    let result = noise_sweep_and_fit(
        target,
        config.g(),
        &grid,
        config.solver.reltol,
        config.solver.abstol,
    )?;
    Ok((
        sweep_csv(&result, config.output.digits),
        sweep_fit_json(&result, config.output.digits),
    ))
}

fn sweep_csv(result: &SweepResult, digits: usize) -> String {
    let mut s = String::from("gamma_ex_over_g,gamma_phi_over_g,fidelity\n");
    for p in &result.points {
        s.push_str(&format!(
            "{},{},{}\n",
            num(p.gamma_ex_over_g, digits),
            num(p.gamma_phi_over_g, digits),
            num(p.fidelity, digits)
        ));
    }
    s
}

fn sweep_fit_json(result: &SweepResult, digits: usize) -> String {
    format!(
        "{{\"target\":\"{}\",\"g\":{},\"grid_points\":{},\"intercept\":{},\"c_ex\":{},\"c_phi\":{},\"rms_residual\":{},\"nonlinear_warning\":{}}}\n",
        result.target.name(),
        num(result.g, digits),
        result.points.len(),
        num(result.intercept, digits),
        num(result.c_ex, digits),
        num(result.c_phi, digits),
        num(result.rms_residual, digits),
        result.nonlinear_warning,
    )
}

/// GHZ preparation report.
pub fn cmd_ghz(config: &RunConfig, n: usize) -> Result<String> {
    let circuit = match n {
        3 => ghz3_circuit(config.g())?,
        5 => ghz5_circuit(config.g())?,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "GHZ protocols exist for 3 or 5 atoms, got {n}"
            )))
        }
    };
    let noise = NoiseParams::uniform(n, config.gamma_ex(), config.gamma_phi());
    let rho = simulate_circuit(
        &circuit,
        &noise,
        config.model_kind(),
        config.solver.reltol,
        config.solver.abstol,
    )?;
    let fidelity = crate::tomography::state_fidelity(&rho, &ghz_target(n));
    let digits = config.output.digits;
    Ok(format!(
        "{{\"n\":{n},\"duration_s\":{},\"fidelity\":{}}}\n",
        num(circuit.total_duration(), digits),
        num(fidelity, digits),
    ))
}

/// Validation suite: layout interference properties, solver oracle,
/// noiseless gate and GHZ-3 checks, schedule construction; with the full
/// model selected, additionally the leakage-vs-anharmonicity trend.
pub fn cmd_validate(config: &RunConfig) -> Result<(String, bool)> {
    let mut report = String::new();
    let mut all_pass = true;
    let mut record = |name: &str, result: Result<()>, report: &mut String| {
        match result {
            Ok(()) => report.push_str(&format!("PASS {name}\n")),
            Err(e) => {
                all_pass = false;
                report.push_str(&format!("FAIL {name}: {e}\n"));
            }
        }
    };

    let layout = config.layout()?;
    let gamma_scale = layout
        .atoms
        .iter()
        .flat_map(|a| a.points.iter().map(|p| p.strength))
        .fold(0.0f64, f64::max);
    record(
        "df-point-interference",
        crate::couplings::verify_reference_properties(&layout, gamma_scale),
        &mut report,
    );
    record("solver-oracle", check_solver_oracle(), &mut report);
    record("noiseless-cczs", check_noiseless_cczs(config), &mut report);
    record("ghz3-noiseless", check_ghz3_noiseless(config), &mut report);
    record("ghz3-schedule", check_schedule(3, config), &mut report);
    record("ghz5-schedule", check_schedule(5, config), &mut report);
    if config.model.kind == ModelChoice::Full {
        let trend = check_leakage_trend(config, &mut report);
        record("full-model-leakage-trend", trend, &mut report);
    }
    Ok((report, all_pass))
}

fn check_solver_oracle() -> Result<()> {
    for seed in 0..3u64 {
        let model = crate::dynamics::testutil::random_model(seed);
        let dim = model.dim();
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(0, 0)] = ONE;
        let a = evolve(&model, &rho, 0.7, 1e-10, 1e-13)?;
        let b = evolve_superop_oracle(&model, &rho, 0.7)?;
        let dev = max_abs(&(&a - &b));
        if dev > 1e-8 {
            return Err(Error::Validation(format!(
                "seed {seed}: solver deviates from oracle by {dev:.3e}"
            )));
        }
    }
    Ok(())
}

fn check_noiseless_cczs(config: &RunConfig) -> Result<()> {
    let register = QutritRegister::new(3);
    let spec = GateSpec::new(GateKind::Cczs, vec![0, 1, 2], config.g())?;
    let h = effective_hamiltonian(&spec, &register)?;
    let model = LindbladModel::new(h, vec![])?;
    let choi = reconstruct_choi(&model, spec.duration(), &register, 1e-11, 1e-14)?;
    let ideal = computational_submatrix(&register, &ideal_unitary(&spec, &register)?.matrix);
    let cal = calibrate_virtual_z(&choi, &ideal, 3)?;
    if 1.0 - cal.fidelity > 1e-9 {
        return Err(Error::Validation(format!(
            "noiseless CCZS infidelity {:.3e}",
            1.0 - cal.fidelity
        )));
    }
    Ok(())
}

fn check_ghz3_noiseless(config: &RunConfig) -> Result<()> {
    let circuit = ghz3_circuit(config.g())?;
    let rho = simulate_circuit(
        &circuit,
        &NoiseParams::none(3),
        ModelKind::Effective,
        1e-12,
        1e-15,
    )?;
    let f = crate::tomography::state_fidelity(&rho, &ghz_target(3));
    if 1.0 - f > 1e-9 {
        return Err(Error::Validation(format!(
            "noiseless GHZ-3 infidelity {:.3e}",
            1.0 - f
        )));
    }
    Ok(())
}

fn check_schedule(n: usize, config: &RunConfig) -> Result<()> {
    let circuit = if n == 3 {
        ghz3_circuit(config.g())?
    } else {
        ghz5_circuit(config.g())?
    };
    let layout: CouplingLayout = reference_layout(n, config.g())?;
    build_schedule(&circuit, &layout)?;
    Ok(())
}

fn check_leakage_trend(config: &RunConfig, report: &mut String) -> Result<()> {
    let register = QutritRegister::new(3);
    let spec = GateSpec::new(GateKind::Cczs, vec![0, 1, 2], config.g())?;
    let idx111 = register.encode(&[1, 1, 1]);
    let proj = crate::algebra::projector_computational(&register).matrix;
    let mut prev = f64::INFINITY;
    for chi_over_g in [12.5, 25.0, 50.0, 100.0] {
        let (h, duration) = full_gate_model(&spec, chi_over_g)?;
        let model = LindbladModel::new(h, vec![])?;
        let mut rho = CMatrix::zeros(27, 27);
        rho[(idx111, idx111)] = ONE;
        let out = evolve(&model, &rho, duration, config.solver.reltol, config.solver.abstol)?;
        let leakage = 1.0 - (&proj * &out * &proj).trace().re;
        report.push_str(&format!(
            "INFO full-model leakage |chi|/g={chi_over_g}: {}\n",
            num(leakage, config.output.digits)
        ));
        if leakage > prev {
            return Err(Error::Validation(format!(
                "leakage {leakage:.3e} at |chi|/g = {chi_over_g} exceeds the previous point"
            )));
        }
        prev = leakage;
    }
    Ok(())
}
