use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use tracing_subscriber::filter::LevelFilter;

use conjsep::conjugacy::{decide_conjugate, ConjugacyConfig, ConjugacyWitness, Outcome};
use conjsep::free_words::{parse_word_arg, Alphabet, Word};
use conjsep::graph_of_groups::{GraphOfGroups, GraphOfGroupsJson};
use conjsep::presentation::{Presentation, PresentationJson};
use conjsep::quotients::{
    enumerate_homs, induced_quotient, search_witness, verify_witness, SearchConfig, WitnessQuery, WitnessReport,
};
use conjsep::rips::{hnn_splitting, rips_construct, verify_rips, Splitting};
use conjsep::small_cancellation::{check_c_prime, Ratio, RelatorSet};
use conjsep::stallings::{characteristic_core, subgroups_of_index, Index, SubgroupGraph, SubgroupGraphJson};

mod exit {
    pub const POSITIVE: u8 = 0;
    pub const NEGATIVE: u8 = 1;
    pub const INPUT_ERROR: u8 = 2;
    pub const INCONCLUSIVE: u8 = 3;
}

#[derive(Parser)]
#[command(name = "conjsep", version, about = "Conjugacy separability toolkit for graphs of free groups")]
struct Cli {
    /// Largest permutation degree tried by quotient searches.
    #[arg(long, global = true, env = "CONJSEP_MAX_N", default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
    max_n: u64,
    /// Wall-clock budget for conjugacy decisions, in seconds.
    #[arg(long, global = true, env = "CONJSEP_BUDGET", default_value_t = 60, value_parser = clap::value_parser!(u64).range(1..))]
    budget: u64,
    /// Worker threads for searches (defaults to available parallelism).
    #[arg(long, global = true, env = "CONJSEP_WORKERS", value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rips construction: writes gamma.json, splitting.json and report.json.
    Rips {
        presentation: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Are all edge images free factors of their vertex groups?
    CheckClean { gog: PathBuf },
    /// Are the edge images at every vertex a malnormal family?
    CheckAcyl { gog: PathBuf },
    /// Small cancellation check, e.g. `check-c16 '[xyxY, xxyy]'`.
    CheckC16 {
        #[arg(required = true)]
        relators: Vec<String>,
        #[arg(long, default_value = "1/6")]
        lambda: Ratio,
        #[arg(long, default_value_t = 4)]
        rank: usize,
    },
    /// Decide whether u and v are conjugate in the fundamental group.
    Conj { gog: PathBuf, u: String, v: String },
    /// Search for a finite quotient separating elements or subgroups.
    Witness {
        /// Presentation or graph-of-groups JSON.
        group: PathBuf,
        #[arg(long, value_enum)]
        kind: WitnessKind,
        #[arg(long)]
        subgroup: Option<String>,
        #[arg(long)]
        element: Option<String>,
        #[arg(long)]
        u: Option<String>,
        #[arg(long)]
        v: Option<String>,
        #[arg(long)]
        left: Option<String>,
        #[arg(long)]
        middle: Option<String>,
        #[arg(long)]
        right: Option<String>,
    },
    /// Subgroups of free groups via Stallings graphs.
    Stallings {
        #[command(subcommand)]
        op: StallingsOp,
    },
    /// Homomorphisms to symmetric groups.
    Quotients {
        #[command(subcommand)]
        op: QuotientsOp,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WitnessKind {
    Sep,
    Conj,
    ConjInto,
    DoubleCoset,
}

#[derive(Subcommand)]
enum StallingsOp {
    Fold {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        words: Vec<String>,
    },
    Member {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long)]
        subgroup: String,
        word: String,
    },
    Intersect {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    Basis {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        words: Vec<String>,
    },
    Hall {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        words: Vec<String>,
    },
    /// Normal core of the given subgroup, or the characteristic core of an index.
    Core {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long)]
        index: Option<usize>,
        words: Vec<String>,
    },
    IndexList {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        #[arg(long)]
        index: usize,
    },
}

#[derive(Subcommand)]
enum QuotientsOp {
    Homs {
        presentation: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Quotient injective on G_v / B_v for a normal finite-index N_v.
    Induced {
        gog: PathBuf,
        #[arg(long, default_value_t = 0)]
        vertex: usize,
        #[arg(long)]
        subgroup: String,
    },
}

#[derive(Debug, Clone, Copy, Serialize)]
struct RunConfig {
    max_n: usize,
    budget_seconds: u64,
    worker_count: usize,
    seed: Option<u64>,
}

impl RunConfig {
    fn search(&self) -> SearchConfig {
        SearchConfig { max_n: self.max_n, workers: self.worker_count }
    }
}

struct Run {
    config: RunConfig,
}

struct Reply {
    code: u8,
    report: Value,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_max_level(
            std::env::var("RUST_LOG").ok().and_then(|s| s.parse::<LevelFilter>().ok()).unwrap_or(LevelFilter::WARN),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::INPUT_ERROR } else { exit::POSITIVE });
        }
    };
    let config = RunConfig {
        max_n: cli.max_n as usize,
        budget_seconds: cli.budget,
        worker_count: cli
            .workers
            .map_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()), |w| w as usize),
        seed: None,
    };
    let run = Run { config };
    match run.dispatch(cli.command) {
        Ok(Reply { code, mut report }) => {
            report["config"] = json!(run.config);
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            // a closed pipe is not an error of the run
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::INPUT_ERROR)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_presentation(path: &Path) -> Result<Presentation> {
    Ok(Presentation::from_json(&read_json::<PresentationJson>(path)?)?)
}

fn read_gog(path: &Path) -> Result<GraphOfGroups> {
    Ok(GraphOfGroups::from_json(&read_json::<GraphOfGroupsJson>(path)?)?)
}

/// A presentation file, or a graph of groups read as its fundamental group.
fn read_group(path: &Path) -> Result<Presentation> {
    let value: Value = read_json(path)?;
    if value.get("vertices").is_some() {
        Ok(read_gog(path)?.present_fundamental_group())
    } else {
        Ok(Presentation::from_json(&serde_json::from_value(value)?)?)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// A word list: `[[1,2],[-1]]`, `[xy, Yx]`, `xy,Yx`, or separate arguments.
fn parse_list(alphabet: &Alphabet, items: &[String]) -> Result<Vec<Word>> {
    let mut out = Vec::new();
    for item in items {
        let t = item.trim();
        if let Ok(rows) = serde_json::from_str::<Vec<Vec<i32>>>(t) {
            for r in rows {
                out.push(alphabet.word(r)?);
            }
            continue;
        }
        if serde_json::from_str::<Vec<i32>>(t).is_ok() {
            out.push(parse_word_arg(alphabet, t)?);
            continue;
        }
        let inner = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')).unwrap_or(t);
        for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            out.push(alphabet.parse(part).with_context(|| format!("word {part:?}"))?);
        }
    }
    Ok(out)
}

fn parse_one(alphabet: &Alphabet, s: &str) -> Result<Word> {
    parse_word_arg(alphabet, s).with_context(|| format!("word {s:?}"))
}

/// Subgroup from words, or from a subgroup-graph JSON file.
fn parse_subgroup(rank: usize, items: &[String]) -> Result<SubgroupGraph> {
    if let [one] = items {
        if one.ends_with(".json") && Path::new(one).exists() {
            let g = SubgroupGraph::from_json(&read_json::<SubgroupGraphJson>(Path::new(one))?)?;
            if g.rank() != rank {
                bail!("subgroup graph has rank {}, expected {rank}", g.rank());
            }
            return Ok(g);
        }
    }
    let words = parse_list(&Alphabet::new(rank), items)?;
    Ok(SubgroupGraph::from_generators(rank, &words))
}

fn subgroup_json(rank: usize, h: &SubgroupGraph) -> Value {
    let a = Alphabet::new(rank);
    json!({
        "graph": h.to_json(),
        "basis": h.basis().iter().map(|w| a.format(w)).collect::<Vec<_>>(),
        "rank": h.subgroup_rank(),
        "index": match h.index() { Index::Finite(n) => json!(n), Index::Infinite => json!("infinite") },
    })
}

fn witness_json(p: &Presentation, r: &WitnessReport) -> Value {
    json!({
        "kind": r.query.kind(),
        "quotient": r.quotient.to_json(p),
        "transcript": r.transcript,
        "verified": verify_witness(p, r),
    })
}

impl Run {
    fn dispatch(&self, command: Command) -> Result<Reply> {
        match command {
            Command::Rips { presentation, out_dir } => self.rips(&presentation, &out_dir),
            Command::CheckClean { gog } => {
                let g = read_gog(&gog)?;
                let r = g.is_clean()?;
                Ok(Reply {
                    code: if r.clean { exit::POSITIVE } else { exit::NEGATIVE },
                    report: json!({"command": "check-clean", "inputs": {"gog": gog}, "outcome": r.clean, "edges": r.edges}),
                })
            }
            Command::CheckAcyl { gog } => {
                let g = read_gog(&gog)?;
                let r = g.is_1_acylindrical()?;
                Ok(Reply {
                    code: if r.acylindrical { exit::POSITIVE } else { exit::NEGATIVE },
                    report: json!({"command": "check-acyl", "inputs": {"gog": gog}, "outcome": r.acylindrical, "witness": r.witness}),
                })
            }
            Command::CheckC16 { relators, lambda, rank } => {
                let a = Alphabet::new(rank);
                let words = parse_list(&a, &relators)?;
                let rs = RelatorSet::new(words)?;
                let v = check_c_prime(&rs, lambda);
                let violation = v.violation.as_ref().map(|(i, w)| {
                    json!({"relator": i, "piece": a.format(&w.piece), "piece_length": w.piece.len(), "first": w.first, "second": w.second})
                });
                Ok(Reply {
                    code: if v.holds { exit::POSITIVE } else { exit::NEGATIVE },
                    report: json!({
                        "command": "check-c16",
                        "inputs": {"relators": rs.relators().iter().map(|w| a.format(w)).collect::<Vec<_>>(), "lambda": lambda.to_string()},
                        "outcome": v.holds,
                        "max_piece_length": v.report.max_piece_length,
                        "violation": violation,
                    }),
                })
            }
            Command::Conj { gog, u, v } => self.conj(&gog, &u, &v),
            Command::Witness { group, kind, subgroup, element, u, v, left, middle, right } => {
                let p = read_group(&group)?;
                let a = p.alphabet();
                let need = |o: &Option<String>, name: &str| o.clone().ok_or_else(|| anyhow!("--{name} is required"));
                let list = |o: &Option<String>, name: &str| -> Result<Vec<Word>> { parse_list(&a, &[need(o, name)?]) };
                let one = |o: &Option<String>, name: &str| -> Result<Word> { parse_one(&a, &need(o, name)?) };
                let query = match kind {
                    WitnessKind::Sep => WitnessQuery::Separability {
                        subgroup: list(&subgroup, "subgroup")?,
                        element: one(&element, "element")?,
                    },
                    WitnessKind::Conj => WitnessQuery::Conjugacy { u: one(&u, "u")?, v: one(&v, "v")? },
                    WitnessKind::ConjInto => WitnessQuery::ConjugacyIntoSubgroup {
                        subgroup: list(&subgroup, "subgroup")?,
                        element: one(&element, "element")?,
                    },
                    WitnessKind::DoubleCoset => WitnessQuery::DoubleCoset {
                        left: list(&left, "left")?,
                        middle: one(&middle, "middle")?,
                        right: list(&right, "right")?,
                        element: one(&element, "element")?,
                    },
                };
                let outcome = search_witness(&p, &query, &self.config.search(), None)?;
                let found = outcome.report.is_some();
                Ok(Reply {
                    code: if found { exit::POSITIVE } else { exit::NEGATIVE },
                    report: json!({
                        "command": "witness",
                        "inputs": {"group": group, "query": query},
                        "outcome": found,
                        "degree_reached": outcome.degree_reached,
                        "witness": outcome.report.as_ref().map(|r| witness_json(&p, r)),
                    }),
                })
            }
            Command::Stallings { op } => self.stallings(op),
            Command::Quotients { op } => self.quotients(op),
        }
    }

    fn rips(&self, path: &Path, out_dir: &Path) -> Result<Reply> {
        let q = read_presentation(path)?;
        let out = rips_construct(&q);
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        write_json(&out_dir.join("gamma.json"), &out.gamma.to_json())?;
        let xy = Alphabet::new(2);
        let table: Vec<Value> =
            out.word_table.iter().map(|w| json!({"name": w.name, "word": xy.format(&w.word)})).collect();
        let counts = json!({"generators": out.gamma.rank(), "relators": out.gamma.relators().len()});
        let (code, report) = match hnn_splitting(&out)? {
            Splitting::Degenerate => {
                write_json(&out_dir.join("splitting.json"), &json!({"degenerate": true, "free_rank": 3}))?;
                (exit::POSITIVE, json!({"outcome": "degenerate", "counts": counts}))
            }
            Splitting::Hnn { graph, .. } => {
                write_json(&out_dir.join("splitting.json"), &graph.to_json())?;
                let r = verify_rips(&out)?;
                let code = if r.passed() { exit::POSITIVE } else { exit::NEGATIVE };
                let checks = json!({
                    "c16": {"passed": r.c16_ok(), "table": r.table_c16, "composed": r.composed_c16},
                    "free_sides": {"passed": r.sides_ok(), "ranks": r.sides},
                    "acylindrical": {"passed": r.acylindricity.acylindrical, "witness": r.acylindricity.witness},
                    "recovers_q": {"passed": r.recovery_ok, "recovered": r.recovered.iter().map(|w| q.format_word(w)).collect::<Vec<_>>()},
                });
                (code, json!({"outcome": r.passed(), "counts": counts, "checks": checks}))
            }
        };
        let mut report = report;
        report["command"] = json!("rips");
        report["inputs"] = json!({"presentation": path, "out_dir": out_dir});
        report["normal_generators"] = json!(out.normal_gens);
        report["word_table"] = json!(table);
        report["config"] = json!(self.config);
        write_json(&out_dir.join("report.json"), &report)?;
        Ok(Reply { code, report })
    }

    fn conj(&self, path: &Path, u: &str, v: &str) -> Result<Reply> {
        let g = read_gog(path)?;
        let (eu, ev) = (g.parse_element(u)?, g.parse_element(v)?);
        let cfg = ConjugacyConfig {
            max_n: self.config.max_n,
            workers: self.config.worker_count,
            budget: Duration::from_secs(self.config.budget_seconds),
            ..ConjugacyConfig::default()
        };
        let verdict = decide_conjugate(&g, &eu, &ev, &cfg)?;
        let p = g.present_fundamental_group();
        let witness = match &verdict.witness {
            None => Value::Null,
            Some(ConjugacyWitness::Conjugator(w)) => {
                json!({"kind": "conjugator", "word": g.format_element(w), "letters": g.element_to_word(w)})
            }
            Some(ConjugacyWitness::TranslationLength { u, v }) => json!({"kind": "translation-length", "u": u, "v": v}),
            Some(ConjugacyWitness::Triviality { u_trivial }) => json!({"kind": "triviality", "u_trivial": u_trivial}),
            Some(ConjugacyWitness::Quotient(r)) => json!({"kind": "quotient", "report": witness_json(&p, r)}),
            Some(ConjugacyWitness::Exhausted(e)) => json!({"kind": "exhausted", "search": e}),
        };
        let code = match verdict.outcome {
            Outcome::Conjugate => exit::POSITIVE,
            Outcome::NonConjugate => exit::NEGATIVE,
            Outcome::Inconclusive => exit::INCONCLUSIVE,
        };
        Ok(Reply {
            code,
            report: json!({
                "command": "conj",
                "inputs": {"gog": path, "u": g.format_element(&eu), "v": g.format_element(&ev)},
                "outcome": verdict.outcome,
                "witness": witness,
                "effort": verdict.effort,
            }),
        })
    }

    fn stallings(&self, op: StallingsOp) -> Result<Reply> {
        let ok = |report: Value| Ok(Reply { code: exit::POSITIVE, report });
        match op {
            StallingsOp::Fold { rank, words } => {
                let h = parse_subgroup(rank, &words)?;
                ok(
                    json!({"command": "stallings fold", "inputs": {"rank": rank, "words": words}, "outcome": subgroup_json(rank, &h)}),
                )
            }
            StallingsOp::Basis { rank, words } => {
                let h = parse_subgroup(rank, &words)?;
                let a = Alphabet::new(rank);
                ok(json!({
                    "command": "stallings basis",
                    "inputs": {"rank": rank, "words": words},
                    "outcome": h.basis().iter().map(|w| a.format(w)).collect::<Vec<_>>(),
                }))
            }
            StallingsOp::Member { rank, subgroup, word } => {
                let h = parse_subgroup(rank, std::slice::from_ref(&subgroup))?;
                let w = parse_one(&Alphabet::new(rank), &word)?;
                let member = h.contains(&w);
                Ok(Reply {
                    code: if member { exit::POSITIVE } else { exit::NEGATIVE },
                    report: json!({"command": "stallings member", "inputs": {"rank": rank, "subgroup": subgroup, "word": word}, "outcome": member}),
                })
            }
            StallingsOp::Intersect { rank, a, b } => {
                let (ha, hb) =
                    (parse_subgroup(rank, std::slice::from_ref(&a))?, parse_subgroup(rank, std::slice::from_ref(&b))?);
                let i = ha.intersect(&hb)?;
                ok(
                    json!({"command": "stallings intersect", "inputs": {"rank": rank, "a": a, "b": b}, "outcome": subgroup_json(rank, &i)}),
                )
            }
            StallingsOp::Hall { rank, words } => {
                let h = parse_subgroup(rank, &words)?;
                let c = h.hall_completion();
                ok(
                    json!({"command": "stallings hall", "inputs": {"rank": rank, "words": words}, "outcome": subgroup_json(rank, &c)}),
                )
            }
            StallingsOp::Core { rank, index, words } => {
                let core = match (index, words.is_empty()) {
                    (Some(n), true) => characteristic_core(rank, n)?,
                    (None, false) => parse_subgroup(rank, &words)?.normal_core()?,
                    _ => bail!("give either --index or subgroup words"),
                };
                ok(
                    json!({"command": "stallings core", "inputs": {"rank": rank, "index": index, "words": words}, "outcome": subgroup_json(rank, &core)}),
                )
            }
            StallingsOp::IndexList { rank, index } => {
                let list = subgroups_of_index(rank, index)?;
                let a = Alphabet::new(rank);
                let subgroups: Vec<Value> = list
                    .iter()
                    .map(|h| json!({"basis": h.basis().iter().map(|w| a.format(w)).collect::<Vec<_>>(), "graph": h.to_json()}))
                    .collect();
                ok(json!({
                    "command": "stallings index-list",
                    "inputs": {"rank": rank, "index": index},
                    "outcome": {"count": list.len(), "subgroups": subgroups},
                }))
            }
        }
    }

    fn quotients(&self, op: QuotientsOp) -> Result<Reply> {
        match op {
            QuotientsOp::Homs { presentation, n } => {
                let p = read_presentation(&presentation)?;
                let homs = enumerate_homs(&p, n, &self.config.search())?;
                let listed: Vec<Value> = homs.iter().take(1000).map(|q| json!(q.to_json(&p))).collect();
                Ok(Reply {
                    code: exit::POSITIVE,
                    report: json!({
                        "command": "quotients homs",
                        "inputs": {"presentation": presentation, "n": n},
                        "outcome": {"count": homs.len(), "truncated": homs.len() > listed.len(), "homs": listed},
                    }),
                })
            }
            QuotientsOp::Induced { gog, vertex, subgroup } => {
                let g = read_gog(&gog)?;
                let rank = g.vertices().get(vertex).ok_or_else(|| anyhow!("no vertex {vertex}"))?.rank;
                let words = parse_list(&g.vertex_alphabet(vertex), std::slice::from_ref(&subgroup))?;
                let nv = SubgroupGraph::from_generators(rank, &words);
                let iq = induced_quotient(&g, vertex, &nv, &self.config.search())?;
                let p = g.present_fundamental_group();
                Ok(Reply {
                    code: exit::POSITIVE,
                    report: json!({
                        "command": "quotients induced",
                        "inputs": {"gog": gog, "vertex": vertex, "subgroup": subgroup},
                        "outcome": {
                            "quotient": iq.quotient.to_json(&p),
                            "hall_index": iq.hall_index,
                            "characteristic_core_index": iq.core_index,
                            "vertex_image_order": iq.vertex_index,
                        },
                    }),
                })
            }
        }
    }
}
