//! The `hyperstruct` binary: every library operation over the canonical
//! file formats.
//!
//! Exit codes: 0 clean, 1 for domain errors (including a structure that
//! fails validation), 2 for usage errors. Domain errors print one line to
//! stderr as `error[code]: message`. All output is deterministic given the
//! input files; `--json` swaps the human text of query subcommands for
//! machine-readable JSON.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hyperstruct::brunnian::{generate_brunnian, remove_element, BrunnianSignature};
use hyperstruct::cluster::{decompose, in_cluster_chain, support, ClusterChain};
use hyperstruct::correlations::{
    brunnian_test, make_parity_data, read_series_csv, second_order_test, write_series_csv,
    ParityKind, Series, DEFAULT_EPSILON, DEFAULT_TAU,
};
use hyperstruct::dot::export_dot;
use hyperstruct::io::{
    read_chain, read_representation, read_states_setup, read_structure,
    read_structure_unchecked, read_trees, structure_to_string, tree_to_string,
};
use hyperstruct::states::{check_compatibility, propagate, update, StateAssignmentMap};
use hyperstruct::transfer::{from_composition, pullback};
use hyperstruct::{ElementId, Error, Hyperstructure, StateValue};

#[derive(Parser)]
#[command(name = "hyperstruct", version, about = "Build, validate, and transform multilevel bond structures")]
struct Cli {
    /// Emit JSON instead of human text on query subcommands.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every structural law and list violations.
    Validate { file: PathBuf },

    /// Ask whether an element belongs to the cluster a bond chain carves out.
    Cluster {
        file: PathBuf,
        /// Level 0 element to test.
        #[arg(long)]
        element: String,
        /// Comma-separated bond labels, levels 1 upward.
        #[arg(long)]
        chain: String,
    },

    /// List the level 0 elements an element transitively rests on.
    Support {
        file: PathBuf,
        target: String,
        #[arg(long)]
        level: Option<usize>,
    },

    /// Unfold a bond into its decomposition tree.
    Decompose {
        file: PathBuf,
        bond: String,
        #[arg(long)]
        level: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },

    /// Rebuild a structure from a decomposition tree file.
    Resynthesize {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },

    /// Produce structures and sample data.
    #[command(subcommand)]
    Generate(GenerateCommand),

    /// Build the structure of iterated preimages of a composition chain.
    FromChain {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },

    /// Pull a structure back along a representation file.
    Pullback {
        representation: PathBuf,
        /// Structure to pull back; defaults to the file named by the
        /// representation, resolved next to it.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },

    /// Remove one element and cascade the consequences.
    Remove {
        file: PathBuf,
        element: String,
        #[arg(long)]
        level: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },

    /// Fold base states up the levels of a structure.
    Propagate {
        structure: PathBuf,
        states: PathBuf,
        /// Re-run incrementally after changes, `element=value`, repeatable.
        #[arg(long = "update", value_name = "ELEM=VALUE")]
        updates: Vec<String>,
    },

    /// Correlation verdicts over series in a CSV file. Always JSON.
    Corr {
        file: PathBuf,
        /// Three series names for the first-order test.
        #[arg(long, value_name = "X,Y,Z", conflicts_with = "second_order")]
        triple: Option<String>,
        /// Nine series names, three groups of three, for the second-order test.
        #[arg(long, value_name = "X1,Y1,Z1,...", conflicts_with = "triple")]
        second_order: Option<String>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
    },

    /// Render a structure as Graphviz DOT.
    ExportDot {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenerateCommand {
    /// A Brunnian tower B(n1,...,nk) from its comma-separated signature.
    Brunnian {
        signature: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Seeded +/-1 parity samples as CSV.
    Parity {
        kind: ParityArg,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ParityArg {
    FirstOrder,
    SecondOrder,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(clean) => {
            if clean {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        // A reader that hangs up early (head, a closed pager) is not a
        // failure of ours.
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}

fn say(text: impl AsRef<str>) -> Result<(), Error> {
    let mut stdout = io::stdout().lock();
    stdout.write_all(text.as_ref().as_bytes())?;
    stdout.write_all(b"\n")?;
    Ok(())
}

/// `Ok(false)` is a clean run whose answer is negative for exit purposes:
/// a validation that found violations.
fn run(cli: &Cli) -> Result<bool, Error> {
    match &cli.command {
        Command::Validate { file } => {
            let h = read_structure_unchecked(open(file)?)?;
            let report = h.validate();
            if cli.json {
                let violations: Vec<serde_json::Value> = report
                    .iter()
                    .map(|v| {
                        serde_json::json!({
                            "kind": v.kind().as_str(),
                            "message": v.to_string(),
                        })
                    })
                    .collect();
                let doc = serde_json::json!({
                    "count": report.len(),
                    "violations": violations,
                });
                say(serde_json::to_string_pretty(&doc)?)?;
            } else if report.is_empty() {
                say("0 violations")?;
            } else {
                say(format!("{report}{} violation(s)", report.len()))?;
            }
            Ok(report.is_empty())
        }

        Command::Cluster { file, element, chain } => {
            let h = read_structure(open(file)?)?;
            let bonds: Vec<ElementId> = chain
                .split(',')
                .enumerate()
                .map(|(i, label)| ElementId::new(label.trim(), i + 1))
                .collect();
            let chain = ClusterChain::new(bonds)?;
            let member =
                in_cluster_chain(&h, &ElementId::new(element.clone(), 0), &chain)?;
            if cli.json {
                say(serde_json::json!({ "member": member }).to_string())?;
            } else {
                say(member.to_string())?;
            }
            Ok(true)
        }

        Command::Support { file, target, level } => {
            let h = read_structure(open(file)?)?;
            let id = resolve(&h, target, *level)?;
            let base = support(&h, &id)?;
            if cli.json {
                let labels: Vec<&str> = base.iter().map(|id| id.label()).collect();
                say(serde_json::to_string_pretty(&labels)?)?;
            } else {
                let labels: Vec<&str> = base.iter().map(|id| id.label()).collect();
                say(labels.join("\n"))?;
            }
            Ok(true)
        }

        Command::Decompose { file, bond, level, output } => {
            let h = read_structure(open(file)?)?;
            let id = resolve(&h, bond, *level)?;
            let tree = decompose(&h, &id)?;
            emit(output.as_deref(), &tree_to_string(&tree))
        }

        Command::Resynthesize { file, output } => {
            let trees = read_trees(open(file)?)?;
            let h = resynthesize_checked(&trees)?;
            emit(output.as_deref(), &structure_to_string(&h))
        }

        Command::Generate(GenerateCommand::Brunnian { signature, output }) => {
            let branching = parse_signature(signature)?;
            if branching.iter().any(|n| *n < 3) {
                eprintln!(
                    "warning: branching below 3 makes a degenerate pattern; \
                     rings come apart in pairs or less"
                );
            }
            let sig = BrunnianSignature::new(branching)?;
            let h = generate_brunnian(&sig);
            emit(output.as_deref(), &structure_to_string(&h))
        }

        Command::Generate(GenerateCommand::Parity { kind, samples, seed, output }) => {
            let kind = match kind {
                ParityArg::FirstOrder => ParityKind::FirstOrder,
                ParityArg::SecondOrder => ParityKind::SecondOrder,
            };
            let series = make_parity_data(kind, *samples, *seed)?;
            let mut buffer = Vec::new();
            write_series_csv(&mut buffer, &series)?;
            emit(output.as_deref(), std::str::from_utf8(&buffer).expect("csv is utf-8"))
        }

        Command::FromChain { file, output } => {
            let chain = read_chain(open(file)?)?;
            let outcome = from_composition(&chain)?;
            for skip in &outcome.skipped {
                eprintln!(
                    "warning: `{}` in space {} has an empty preimage, no bond formed",
                    skip.label,
                    skip.space + 1
                );
            }
            emit(output.as_deref(), &structure_to_string(&outcome.structure))
        }

        Command::Pullback { representation, target, output } => {
            let rep = read_representation(open(representation)?)?;
            let target_path = match target {
                Some(path) => path.clone(),
                None => representation
                    .parent()
                    .unwrap_or_else(|| Path::new("."))
                    .join(&rep.target),
            };
            let h = read_structure(open(&target_path)?)?;
            let pulled = pullback(&h, &rep.representation)?;
            emit(output.as_deref(), &structure_to_string(&pulled))
        }

        Command::Remove { file, element, level, output } => {
            let h = read_structure(open(file)?)?;
            let id = resolve(&h, element, *level)?;
            let out = remove_element(&h, &id)?;
            emit(output.as_deref(), &structure_to_string(&out))
        }

        Command::Propagate { structure, states, updates } => {
            let h = read_structure(open(structure)?)?;
            let setup = read_states_setup(open(states)?)?;
            let assignment = propagate(&h, &setup.spaces, &setup.aggregators, &setup.base)?;
            if updates.is_empty() {
                print_assignment(cli.json, &assignment, None)?;
                return Ok(true);
            }
            let mut changes = BTreeMap::new();
            for raw in updates {
                let (label, value) = parse_update(raw)?;
                changes.insert(label, value);
            }
            let updated = update(&h, &assignment, &setup.spaces, &setup.aggregators, &changes)?;
            debug_assert!(check_compatibility(&h, &updated, &setup.aggregators).is_empty());
            print_assignment(cli.json, &updated, Some(&assignment))?;
            Ok(true)
        }

        Command::Corr { file, triple, second_order, epsilon, tau } => {
            let series = read_series_csv(open(file)?)?;
            let report = match (triple, second_order) {
                (Some(names), None) => {
                    let picked = pick_series(&series, names, 3)?;
                    let report =
                        brunnian_test(picked[0], picked[1], picked[2], *epsilon, *tau)?;
                    serde_json::to_string_pretty(&report)?
                }
                (None, Some(names)) => {
                    let picked = pick_series(&series, names, 9)?;
                    let groups: [[Series; 3]; 3] = [
                        [picked[0].clone(), picked[1].clone(), picked[2].clone()],
                        [picked[3].clone(), picked[4].clone(), picked[5].clone()],
                        [picked[6].clone(), picked[7].clone(), picked[8].clone()],
                    ];
                    let report = second_order_test(&groups, *epsilon, *tau)?;
                    serde_json::to_string_pretty(&report)?
                }
                _ => {
                    return Err(Error::LengthMismatch(0, 3));
                }
            };
            say(report)?;
            Ok(true)
        }

        Command::ExportDot { file, output } => {
            let h = read_structure(open(file)?)?;
            emit(output.as_deref(), &export_dot(&h))
        }
    }
}

fn open(path: &Path) -> Result<impl Read, Error> {
    File::open(path).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<bool, Error> {
    match output {
        Some(path) => {
            let mut file = File::create(path)?;
            file.write_all(text.as_bytes())?;
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(true)
}

/// Find `label` in `h`, at the given level or anywhere if none is given.
/// A label on several levels needs `--level` to pick one.
fn resolve(h: &Hyperstructure, label: &str, level: Option<usize>) -> Result<ElementId, Error> {
    if let Some(level) = level {
        let id = ElementId::new(label, level);
        if !h.contains(&id) {
            return Err(Error::UnknownElement(id));
        }
        return Ok(id);
    }
    let mut matches = h.find_by_label(label);
    match matches.len() {
        0 => Err(Error::UnknownElement(ElementId::new(label, 0))),
        1 => Ok(matches.remove(0)),
        _ => Err(Error::UnknownLabel {
            label: format!("{label} (on several levels, pass --level)"),
            space: "structure".into(),
        }),
    }
}

fn parse_signature(text: &str) -> Result<Vec<usize>, Error> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::BadSignature(format!("`{part}` is not a count")))
        })
        .collect()
}

fn parse_update(raw: &str) -> Result<(String, StateValue), Error> {
    let Some((label, value)) = raw.split_once('=') else {
        return Err(Error::SpaceMismatch(format!(
            "update `{raw}` is not of the form element=value"
        )));
    };
    let value = value.trim();
    let parsed = if let Ok(i) = value.parse::<i64>() {
        StateValue::Int(i)
    } else if let Ok(x) = value.parse::<f64>() {
        StateValue::Real(x)
    } else {
        StateValue::text(value)
    };
    Ok((label.trim().to_string(), parsed))
}

fn pick_series<'a>(
    series: &'a [Series],
    names: &str,
    want: usize,
) -> Result<Vec<&'a Series>, Error> {
    let wanted: Vec<&str> = names.split(',').map(str::trim).collect();
    if wanted.len() != want {
        return Err(Error::LengthMismatch(wanted.len(), want));
    }
    wanted
        .into_iter()
        .map(|name| {
            series.iter().find(|s| s.name() == name).ok_or_else(|| Error::CsvData {
                row: 0,
                column: name.to_string(),
                detail: "no such series".into(),
            })
        })
        .collect()
}

fn resynthesize_checked(
    trees: &[hyperstruct::cluster::DecompositionTree],
) -> Result<Hyperstructure, Error> {
    let h = hyperstruct::cluster::resynthesize(trees)?;
    let report = h.validate();
    if report.is_empty() {
        Ok(h)
    } else {
        Err(Error::Invalid(report))
    }
}

fn print_assignment(
    json: bool,
    assignment: &StateAssignmentMap,
    prior: Option<&StateAssignmentMap>,
) -> Result<(), Error> {
    if json {
        let entries: Vec<serde_json::Value> = assignment
            .iter()
            .map(|(id, value)| {
                let mut entry = serde_json::json!({
                    "element": id.label(),
                    "level": id.level(),
                    "value": value,
                });
                if let Some(prior) = prior {
                    let old = prior.get(id);
                    if old != Some(value) {
                        entry["was"] = serde_json::to_value(old)?;
                    }
                }
                Ok(entry)
            })
            .collect::<Result<_, Error>>()?;
        return say(serde_json::to_string_pretty(&entries)?);
    }
    let mut lines = String::new();
    for (id, value) in assignment.iter() {
        let line = match prior.and_then(|p| p.get(id)) {
            Some(old) if old != value => {
                format!("{}@{} = {value} (was {old})\n", id.label(), id.level())
            }
            _ => format!("{}@{} = {value}\n", id.label(), id.level()),
        };
        lines.push_str(&line);
    }
    lines.pop();
    say(lines)
}
