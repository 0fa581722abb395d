use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use folnerlab_core::{CoverBudget, XiRule};
use serde_json::{json, Value};

use folnerlab_cli::config::*;
use folnerlab_cli::run::{execute, report, Status};

#[derive(Parser, Debug)]
#[command(name = "folnerlab", version, about = "Covering constants, Folner checks and castles on finite windows")]
struct Cli {
    /// Run a config file (one run or an array of runs) instead of a subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here; refuses to overwrite.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Clone)]
struct BudgetArgs {
    /// Largest universe solved exactly.
    #[arg(long)]
    max_universe: Option<usize>,
    /// Branch-and-bound node budget.
    #[arg(long)]
    max_nodes: Option<u64>,
    /// Wall-clock cap in seconds for exact search.
    #[arg(long)]
    time_cap: Option<f64>,
}

impl BudgetArgs {
    fn apply(&self, mut b: CoverBudget) -> CoverBudget {
        if let Some(x) = self.max_universe {
            b.max_universe = x;
        }
        if let Some(x) = self.max_nodes {
            b.max_nodes = x;
        }
        if let Some(x) = self.time_cap {
            b.time_cap = x;
        }
        b
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Covering constant of a finite set.
    Cover {
        #[arg(long)]
        group: String,
        #[arg(long)]
        m: Option<usize>,
        /// `a..b,c..d`, a point, `ball:R` or a JSON array.
        #[arg(long, allow_hyphen_values = true)]
        set: Option<String>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        index: Option<u64>,
        #[arg(long, value_enum, default_value = "constant")]
        check: CoverCheck,
        #[arg(long = "L")]
        l: Option<usize>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Checks on a Folner family over a range of indices.
    Folner {
        #[arg(long)]
        family: String,
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_enum, default_value = "wafc")]
        check: FolnerCheck,
        #[arg(long, default_value_t = 1)]
        lmin: u64,
        #[arg(long)]
        lmax: u64,
        #[arg(long = "L")]
        l_budget: Option<usize>,
        /// Use `l -> F_l^-1`.
        #[arg(long)]
        inverse: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Density tolerance for `--check sdp`, as `p/q`.
        #[arg(long)]
        epsilon: Option<String>,
        /// First index tested for density.
        #[arg(long = "K")]
        k: Option<u64>,
        /// Growth factor in `xi(i,i) <= i M`.
        #[arg(long = "M")]
        m_bound: Option<u64>,
        /// `inferred`, `identity` or `sqrt_shear`.
        #[arg(long)]
        xi: Option<String>,
        /// Largest `i, j, l1, l2` for `--check sdp`; defaults to `--lmax`.
        #[arg(long)]
        scale_max: Option<u64>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Maximal separated marker set on an orbit window.
    Marker {
        #[arg(long)]
        group: String,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        set: String,
        #[arg(long, allow_hyphen_values = true)]
        separation: Option<String>,
        #[arg(long)]
        radius: u32,
        #[arg(long)]
        core_radius: Option<u32>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Castle built from markers.
    Castle(CastleArgs),
    /// Partition of unity from a strong castle.
    Amdim {
        #[command(flatten)]
        castle: CastleArgs,
        /// Test element for the equivariance defect, e.g. `1,0,0`; repeatable.
        #[arg(long = "g", allow_hyphen_values = true)]
        test_elements: Vec<String>,
    },
    /// Dimension bounds.
    Bounds {
        #[arg(long = "Lg")]
        l_g: u64,
        #[arg(long)]
        d: u64,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long = "LA")]
        l_a: Option<u64>,
        #[arg(long = "LAinv")]
        l_a_inv: Option<u64>,
    },
}

#[derive(Args, Debug, Clone)]
struct CastleArgs {
    #[arg(long)]
    group: String,
    #[arg(long)]
    family: String,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    d_extra: usize,
    #[arg(long)]
    strong: bool,
    /// Window radius `R`.
    #[arg(long, default_value_t = 10)]
    radius: u32,
    /// Core radius; defaults to `R`.
    #[arg(long)]
    core_radius: Option<u32>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[command(flatten)]
    budget: BudgetArgs,
}

impl CastleArgs {
    fn into_config(self) -> CastleConfig {
        CastleConfig {
            group: GroupArg::Short(self.group),
            family: FamilyArg::Name(self.family),
            m: self.m,
            n: self.n,
            d_extra: self.d_extra,
            strong: self.strong,
            radius: self.radius,
            core_radius: self.core_radius,
            budget: self.budget.apply(castle_budget()),
            format: self.format,
        }
    }
}

fn parse_coords(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|x| x.trim().parse().with_context(|| format!("not an integer: {x:?}")))
        .collect()
}

fn to_run(cmd: Command) -> Result<RunConfig> {
    Ok(match cmd {
        Command::Cover {
            group,
            m,
            set,
            family,
            index,
            check,
            l,
            budget,
        } => RunConfig::Cover(CoverConfig {
            group: GroupArg::Short(group),
            m,
            set,
            family: family.map(FamilyArg::Name),
            index,
            check,
            l,
            budget: budget.apply(CoverBudget::default()),
        }),
        Command::Folner {
            family,
            group,
            m,
            check,
            lmin,
            lmax,
            l_budget,
            inverse,
            format,
            epsilon,
            k,
            m_bound,
            xi,
            scale_max,
            budget,
        } => {
            let mut sdp = SdpParams::default();
            if let Some(e) = epsilon {
                sdp.epsilon = e;
            }
            if let Some(k) = k {
                sdp.k = k;
            }
            if let Some(mb) = m_bound {
                sdp.m_bound = mb;
            }
            if let Some(x) = xi {
                sdp.xi = serde_json::from_value::<XiRule>(json!(x)).context("unknown --xi rule")?;
            }
            // sdp scales follow --lmax unless given
            let s = scale_max.unwrap_or(lmax);
            sdp.scale_max = s;
            sdp.l_max = s;
            RunConfig::Folner(FolnerConfig {
                family: FamilyArg::Name(family),
                group: group.map(GroupArg::Short),
                m,
                check,
                lmin,
                lmax,
                l_budget,
                inverse,
                budget: budget.apply(CoverBudget::default()),
                sdp,
                format,
            })
        }
        Command::Marker {
            group,
            m,
            set,
            separation,
            radius,
            core_radius,
            budget,
        } => RunConfig::Marker(MarkerConfig {
            group: GroupArg::Short(group),
            m,
            set,
            separation,
            radius,
            core_radius,
            budget: budget.apply(CoverBudget::default()),
        }),
        Command::Castle(a) => RunConfig::Castle(a.into_config()),
        Command::Amdim { castle, test_elements } => RunConfig::Amdim(AmdimConfig {
            castle: castle.into_config(),
            test_elements: test_elements.iter().map(|s| parse_coords(s)).collect::<Result<_>>()?,
        }),
        Command::Bounds {
            l_g,
            d,
            m,
            l_a,
            l_a_inv,
        } => RunConfig::Bounds(BoundsConfig {
            l_g,
            d,
            m,
            l_a,
            l_a_inv,
        }),
    })
}

fn wants_csv(cfg: &RunConfig) -> bool {
    match cfg {
        RunConfig::Folner(c) => c.format == Format::Csv,
        RunConfig::Castle(c) => c.format == Format::Csv,
        _ => false,
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = OpenOptions::new()
                .write(true)
                .create_new(true)
                .open(path)
                .with_context(|| format!("cannot create {} (existing files are not overwritten)", path.display()))?;
            f.write_all(text.as_bytes())?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn pretty(v: &Value) -> Result<String> {
    // serde_json's default map is ordered, so keys come out sorted.
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn real_main() -> Result<Status> {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Ok(t) = std::env::var("FOLNERLAB_THREADS") {
        let n: usize = t.parse().context("FOLNERLAB_THREADS must be a positive integer")?;
        if n == 0 {
            bail!("FOLNERLAB_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let runs = match (&cli.config, cli.command) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_campaign(&text)?
        }
        (None, Some(cmd)) => vec![to_run(cmd)?],
        (Some(_), Some(_)) => bail!("give either --config or a subcommand, not both"),
        (None, None) => bail!("nothing to do; see --help"),
    };
    if runs.is_empty() {
        bail!("config holds no runs");
    }

    if runs.len() == 1 {
        let cfg = &runs[0];
        let outcome = execute(cfg)?;
        let text = match (&outcome.csv, wants_csv(cfg)) {
            (Some(csv), true) => csv.clone(),
            _ => pretty(&report(cfg, &outcome))?,
        };
        emit(&cli.out, &text)?;
        return Ok(outcome.status);
    }

    let mut reports = Vec::with_capacity(runs.len());
    let mut worst = Status::Computed;
    for cfg in &runs {
        let outcome = execute(cfg)?;
        worst = worst.max(outcome.status);
        reports.push(report(cfg, &outcome));
    }
    let doc = json!({
        "tool": "folnerlab",
        "version": env!("CARGO_PKG_VERSION"),
        "runs": reports,
        "status": worst.as_str(),
    });
    emit(&cli.out, &pretty(&doc)?)?;
    Ok(worst)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
