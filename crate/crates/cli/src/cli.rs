use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{ArgGroup, Args, Parser, Subcommand};
use strata_core::config::Config;
use strata_core::lexicon::{ConceptId, EnrichRequest, LanguageTag};
use strata_core::project::{DecisionDetail, ExportFormat, Phase, Project, Resolution, Workspace};
use strata_core::{DecisionId, SenseStatus};

#[derive(Debug, Parser)]
#[command(name = "strata", version, about = "Stratified data integration with a reviewable decision log")]
pub struct Cli {
    /// Directory holding the projects.
    #[arg(long, global = true, env = "STRATA_ROOT", default_value = ".")]
    pub root: PathBuf,
    /// Project id under the root. Without it the current directory must be a project.
    #[arg(long, short, global = true, env = "STRATA_PROJECT")]
    pub project: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a project under the root.
    Init {
        name: String,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Add a dataset; every artifact is dropped.
    Import {
        csv: PathBuf,
        #[arg(long)]
        meta: PathBuf,
    },
    /// Replace the configuration; every artifact is dropped.
    Config { file: PathBuf },
    /// Run one phase, or all of them in order.
    Run {
        #[arg(value_parser = ["leg", "etg", "eg", "all"])]
        phase: String,
    },
    /// List decisions.
    Decisions {
        #[arg(long)]
        pending: bool,
        #[arg(long)]
        json: bool,
    },
    /// Resolve a decision.
    Decide(Decide),
    /// Print the decision log.
    Log,
    /// Print a phase artifact.
    Export {
        #[arg(long, value_parser = ["leg", "etg", "eg"])]
        what: String,
        #[arg(long, value_parser = ["tsv", "ttl", "jsonld", "json"])]
        format: String,
        /// Write here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the EG labelled in a language.
    Render {
        #[arg(long)]
        lang: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Copy inputs and decision log into a new project and rerun every phase.
    Replay { dest: String },
    /// Serve the HTTP review API for every project under the root.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 4)]
        threads: usize,
    },
}

#[derive(Debug, Args)]
#[group(skip)]
#[command(group(ArgGroup::new("resolution").required(true).multiple(false)))]
pub struct Decide {
    pub id: String,
    /// Pick this concept for a sense decision.
    #[arg(long, group = "resolution")]
    pub choose: Option<u32>,
    /// Allow --choose outside the candidate list.
    #[arg(long, requires = "choose")]
    pub force: bool,
    #[arg(long, group = "resolution")]
    pub accept: bool,
    #[arg(long, group = "resolution")]
    pub reject: bool,
    /// Enrichment request as JSON, or @file holding it.
    #[arg(long, group = "resolution")]
    pub enrich: Option<String>,
    /// Move an entity to the etype of this concept.
    #[arg(long, group = "resolution")]
    pub reseat: Option<u32>,
}

impl Decide {
    fn resolution(&self) -> anyhow::Result<Resolution> {
        Ok(if let Some(c) = self.choose {
            Resolution::Choose {
                concept: ConceptId(c),
                force: self.force,
            }
        } else if self.accept {
            Resolution::Accept
        } else if self.reject {
            Resolution::Reject
        } else if let Some(arg) = &self.enrich {
            let text = match arg.strip_prefix('@') {
                Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
                None => arg.clone(),
            };
            let request: EnrichRequest = serde_json::from_str(&text).context("parsing enrichment request")?;
            Resolution::Enrich { request }
        } else if let Some(c) = self.reseat {
            Resolution::Reseat { concept: ConceptId(c) }
        } else {
            bail!("no resolution given")
        })
    }
}

fn read_config(path: Option<&Path>) -> anyhow::Result<Config> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(Config::parse(&text).map_err(strata_core::ProjectError::from)?)
        }
        None => Ok(Config::default()),
    }
}

impl Cli {
    fn workspace(&self) -> Workspace {
        Workspace::new(&self.root)
    }

    fn open(&self) -> anyhow::Result<Project> {
        Ok(match &self.project {
            Some(id) => self.workspace().open(id)?,
            None => Project::open(Path::new("."))?,
        })
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match &cli.command {
        Command::Init { name, lexicon, config } => {
            let config = read_config(config.as_deref())?;
            let text = std::fs::read_to_string(lexicon).with_context(|| format!("reading {}", lexicon.display()))?;
            let project = cli.workspace().create(name, config, &text)?;
            writeln!(out, "created {}", project.root().display())?;
        }
        Command::Import { csv, meta } => {
            let id = cli.open()?.import_dataset(csv, meta)?;
            writeln!(out, "{id}")?;
        }
        Command::Config { file } => {
            cli.open()?.set_config(read_config(Some(file))?)?;
            writeln!(out, "config replaced; rerun the phases")?;
        }
        Command::Run { phase } => {
            let project = cli.open()?;
            let reports = if phase == "all" {
                project.run_all()?
            } else {
                vec![project.run_phase(phase.parse()?)?]
            };
            for r in reports {
                let counts: Vec<String> = r.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let state = if r.complete { "complete" } else { "pending" };
                writeln!(out, "{}\t{state}\t{}", r.phase, counts.join(" "))?;
                for id in &r.pending {
                    writeln!(out, "  pending {id}")?;
                }
                for w in &r.warnings {
                    writeln!(out, "  warning {w}")?;
                }
            }
        }
        Command::Decisions { pending, json } => {
            let decisions = cli.open()?.decisions(*pending)?;
            if *json {
                serde_json::to_writer_pretty(&mut *out, &decisions)?;
                writeln!(out)?;
            } else {
                for d in decisions {
                    let marker = if d.pending { "?" } else { " " };
                    writeln!(out, "{marker} {}\t{}", d.id, describe(&d.detail))?;
                }
            }
        }
        Command::Decide(decide) => {
            let outcome = cli
                .open()?
                .submit_decision(&DecisionId::new(&decide.id), decide.resolution()?)?;
            writeln!(out, "logged #{} for {}", outcome.entry.seq, outcome.entry.decision)?;
            let r = outcome.report;
            if r.complete {
                writeln!(out, "{} complete", r.phase)?;
            } else {
                writeln!(out, "{} still pending: {}", r.phase, r.pending.len())?;
            }
        }
        Command::Log => {
            for e in cli.open()?.log()? {
                writeln!(out, "{}", serde_json::to_string(&e)?)?;
            }
        }
        Command::Export { what, format, out: dest } => {
            let what: Phase = what.parse()?;
            let format: ExportFormat = format.parse()?;
            let text = cli.open()?.export(what, format)?;
            match dest {
                Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
                None => out.write_all(text.as_bytes())?,
            }
        }
        Command::Render { lang, json } => {
            let project = cli.open()?;
            let lang = match lang {
                Some(l) => LanguageTag::new(l.as_str()).map_err(strata_core::ProjectError::from)?,
                None => project.manifest()?.config.default_language,
            };
            let rendered = project.render(&lang)?;
            if *json {
                serde_json::to_writer_pretty(&mut *out, &rendered)?;
                writeln!(out)?;
            } else {
                out.write_all(rendered.to_text().as_bytes())?;
            }
        }
        Command::Replay { dest } => {
            let project = cli.open()?;
            let dir = cli.root.join(dest);
            let clone = project.clone_inputs(&dir)?;
            for r in clone.run_all()? {
                let state = if r.complete { "complete" } else { "pending" };
                writeln!(out, "{}\t{state}", r.phase)?;
            }
            writeln!(out, "replayed into {}", clone.root().display())?;
        }
        Command::Serve { port, host, threads } => {
            crate::server::serve(cli.workspace(), &format!("{host}:{port}"), *threads)?;
        }
    }
    Ok(())
}

fn describe(detail: &DecisionDetail) -> String {
    match detail {
        DecisionDetail::Sense(s) => {
            let status = match s.status {
                SenseStatus::Pending => "pending".to_string(),
                SenseStatus::NewConceptRequested => "needs a new concept".to_string(),
                SenseStatus::Auto(c) => format!("auto {c}"),
                SenseStatus::Confirmed(c) => format!("confirmed {c}"),
                SenseStatus::Overridden(c) => format!("overridden {c}"),
            };
            let candidates: Vec<String> = s
                .candidates
                .iter()
                .map(|c| format!("{}:{:.2}", c.concept, c.score))
                .collect();
            format!("'{}' ({}) {status} [{}]", s.term.surface, s.term.language, candidates.join(" "))
        }
        DecisionDetail::Match(m) => format!("similarity {:.2} {:?}", m.similarity, m.status),
        DecisionDetail::Merge(m) => format!("{} ~ {} {:?}", m.left, m.right, m.status),
    }
}

/// Exit code for a failed command: 2 when an internal invariant broke,
/// 1 for anything the user can fix.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use strata_core::project::ErrorClass;
    match err.downcast_ref::<strata_core::ProjectError>() {
        Some(e) if e.class() == ErrorClass::Internal => 2,
        _ => 1,
    }
}
