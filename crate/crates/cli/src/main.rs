//! `schottky`: command-line front end for grafting-core.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 when the
//! input cannot be read or parsed.

mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use grafting_core::brancov::{self, BaseLoop, PreimageOptions};
use grafting_core::foldgraph::{Decomposition, GraphDoc, LabeledGraph};
use grafting_core::graftcalc::PresentationDoc;
use grafting_core::moebius::{Complex, SpherePoint};
use grafting_core::multiarc::{self, ChordDiagram, DegreeTuple, MultiarcError};
use grafting_core::schottky::{reduced_word_count, SchottkyDoc, SchottkyGroup};

use crate::svg::{depth_color, Svg};

const DEFAULT_VERIFY_LEN: usize = 6;
const DEFAULT_LIMIT_DEPTH: usize = 8;

#[derive(Debug, Parser)]
#[command(name = "schottky", version, about = "Schottky groups, folding, multiarcs, grafting and branched covers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Numeric tolerance; overrides the document value where one exists.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Cap on the number of words or disks generated.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_words: usize,
    /// Word length for `verify`, disk depth for `limitset`.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Svg,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a group and check that all short words are loxodromic.
    Verify { input: PathBuf },
    /// Approximate the limit set by nested disks.
    Limitset { input: PathBuf },
    /// Fold a labeled graph and compare it with the rose.
    Fold {
        input: PathBuf,
        /// Exit 1 unless the graph folds onto the rose.
        #[arg(long)]
        expect_rose: bool,
    },
    /// Build a non-crossing multiarc with the given endpoint counts.
    Multiarc {
        /// Comma-separated endpoint counts, e.g. `1,2,3`.
        #[arg(long)]
        degrees: String,
        /// Also draw the diagram to this SVG file.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Grafting presentations.
    Graft {
        #[command(subcommand)]
        action: GraftAction,
    },
    /// Lift a loop through a rational map.
    Preimage {
        /// Rational expression in z, e.g. `z^2` or `(z-1)^3 + 1`.
        #[arg(long)]
        map: String,
        /// Base circle `cx,cy,r`.
        #[arg(long, conflicts_with = "polygon")]
        circle: Option<String>,
        /// Base polygon `x,y;x,y;...`.
        #[arg(long)]
        polygon: Option<String>,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        /// Marked point `x,y` or `inf`; repeatable. Defaults to the
        /// ramification points of the map.
        #[arg(long)]
        marked: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
enum GraftAction {
    /// Check every invariant of a presentation document.
    Verify { input: PathBuf },
}

/// Text for the chosen sink plus the verdict.
struct Report {
    body: String,
    ok: bool,
}

impl Report {
    fn pass(body: String) -> Self {
        Report { body, ok: true }
    }

    fn fail(body: String) -> Self {
        Report { body, ok: false }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => match emit(&cli, &report.body) {
            Ok(()) if report.ok => ExitCode::SUCCESS,
            Ok(()) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(cli: &Cli, body: &str) -> anyhow::Result<()> {
    match &cli.out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<Report> {
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            bail!("--tol must be a positive number, got {t}");
        }
    }
    if cli.max_words == 0 {
        bail!("--max-words must be positive");
    }
    if cli.depth == Some(0) {
        bail!("--depth must be positive");
    }
    match &cli.command {
        Command::Verify { input } => cmd_verify(cli, input),
        Command::Limitset { input } => cmd_limitset(cli, input),
        Command::Fold { input, expect_rose } => cmd_fold(cli, input, *expect_rose),
        Command::Multiarc { degrees, svg } => cmd_multiarc(cli, degrees, svg.as_deref()),
        Command::Graft { action: GraftAction::Verify { input } } => cmd_graft_verify(cli, input),
        Command::Preimage { map, circle, polygon, samples, marked } => {
            cmd_preimage(cli, map, circle.as_deref(), polygon.as_deref(), *samples, marked)
        }
    }
}

fn read_doc<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn require_format(cli: &Cli, allowed: &[Format], command: &str) -> anyhow::Result<()> {
    if !allowed.contains(&cli.format) {
        bail!("{command} does not support --format {:?}", cli.format);
    }
    Ok(())
}

// Fixed-precision decimal without a negative zero.
fn fixed(x: f64, digits: usize) -> String {
    let s = format!("{x:.digits$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn point_label(p: &SpherePoint) -> String {
    match p.to_complex() {
        None => "inf".to_string(),
        Some(z) => format!("{},{}", fixed(z.re, 6), fixed(z.im, 6)),
    }
}

fn load_group(cli: &Cli, input: &Path) -> anyhow::Result<Result<SchottkyGroup, String>> {
    let mut doc: SchottkyDoc = read_doc(input)?;
    if cli.tol.is_some() {
        doc.tol = cli.tol;
    }
    Ok(SchottkyGroup::from_doc(&doc).map_err(|e| format!("FAIL build {e}\n")))
}

fn cmd_verify(cli: &Cli, input: &Path) -> anyhow::Result<Report> {
    require_format(cli, &[Format::Text], "verify")?;
    let group = match load_group(cli, input)? {
        Ok(g) => g,
        Err(line) => return Ok(Report::fail(line)),
    };
    let mut out = format!("PASS build rank={} fuchsian={}\n", group.rank(), group.is_fuchsian());
    let max_len = cli.depth.unwrap_or(DEFAULT_VERIFY_LEN);
    let needed = reduced_word_count(group.rank(), max_len);
    if needed > cli.max_words as u128 {
        writeln!(out, "FAIL loxodromic CapExceeded: length {max_len} needs {needed} words, cap is {}", cli.max_words)?;
        return Ok(Report::fail(out));
    }
    let report = group.all_loxodromic_check(max_len);
    if let Some(v) = report.violations.first() {
        let class = match &v.class {
            Ok(c) => format!("{c:?}"),
            Err(e) => e.to_string(),
        };
        writeln!(
            out,
            "FAIL loxodromic word={} class={class} violations={}",
            v.word,
            report.violations.len()
        )?;
        return Ok(Report::fail(out));
    }
    writeln!(out, "PASS loxodromic words={} min_trace_distance={:.6e}", report.checked, report.min_trace_distance)?;
    Ok(Report::pass(out))
}

fn cmd_limitset(cli: &Cli, input: &Path) -> anyhow::Result<Report> {
    let group = match load_group(cli, input)? {
        Ok(g) => g,
        Err(line) => return Ok(Report::fail(line)),
    };
    let depth = cli.depth.unwrap_or(DEFAULT_LIMIT_DEPTH);
    let approx = match group.limit_set_approx(depth, cli.max_words) {
        Ok(a) => a,
        Err(e) => return Ok(Report::fail(format!("FAIL limitset {e}\n"))),
    };
    let body = match cli.format {
        Format::Text => {
            let tree = &approx.tree;
            format!(
                "PASS limitset depth={depth} disks={} points={} min_slack={:.6e} leaf_diameter={:.6e}\n",
                tree.nodes.len(),
                approx.points.len(),
                tree.min_nesting_slack(),
                tree.max_diameter_at(depth)
            )
        }
        Format::Csv => {
            let mut s = String::from("x,y\n");
            for p in &approx.points {
                let z = p.to_complex().expect("disk centers are finite");
                writeln!(s, "{},{}", fixed(z.re, 12), fixed(z.im, 12))?;
            }
            s
        }
        Format::Svg => {
            let mut svg = Svg::new();
            for node in &approx.tree.nodes {
                let (c, r) = node.disk.center_radius().expect("disks are round");
                let stroke = if node.depth == 1 { "black" } else { depth_color(node.depth) };
                let fill = if node.depth == depth { depth_color(node.depth) } else { "none" };
                svg.circle(c, r, stroke, fill);
            }
            for p in &approx.points {
                if let Some(z) = p.to_complex() {
                    svg.point(z, "black");
                }
            }
            svg.finish()
        }
    };
    Ok(Report::pass(body))
}

fn cmd_fold(cli: &Cli, input: &Path, expect_rose: bool) -> anyhow::Result<Report> {
    require_format(cli, &[Format::Text], "fold")?;
    let doc: GraphDoc = read_doc(input)?;
    let graph = LabeledGraph::from_doc(&doc).with_context(|| format!("invalid graph in {}", input.display()))?;
    match graph.decompose_to_rose() {
        Decomposition::Iso { trace, .. } => Ok(Report::pass(format!("{trace}ISO rose({})\n", graph.rank()))),
        Decomposition::NotRose { trace, .. } => {
            let body = format!("{trace}NOT-ROSE rank={}\n", graph.cycle_rank());
            Ok(if expect_rose { Report::fail(body) } else { Report::pass(body) })
        }
    }
}

fn cmd_multiarc(cli: &Cli, degrees: &str, svg_path: Option<&Path>) -> anyhow::Result<Report> {
    require_format(cli, &[Format::Text, Format::Svg], "multiarc")?;
    let tuple: DegreeTuple = degrees.parse().map_err(|e: MultiarcError| anyhow!(e))?;
    let diagram = match multiarc::construct(&tuple) {
        Ok(d) => d,
        Err(e @ MultiarcError::Infeasible(_)) => return Ok(Report::fail(format!("INFEASIBLE {e}\n"))),
        Err(e) => return Ok(Report::fail(format!("FAIL {e}\n"))),
    };
    if !diagram.validate(&tuple) {
        return Ok(Report::fail(format!("FAIL invalid diagram for {tuple}\n")));
    }
    let drawing = multiarc_svg(&diagram);
    if let Some(path) = svg_path {
        fs::write(path, &drawing).with_context(|| format!("writing {}", path.display()))?;
    }
    let body = match cli.format {
        Format::Svg => drawing,
        _ => format!("degrees {tuple}\nchords {}\n{diagram}", diagram.chords.len()),
    };
    Ok(Report::pass(body))
}

// Points on edge `e` of a regular polygon inscribed in the circle of
// radius 8; edge `e` spans the corners `e` and `e + 1` counterclockwise.
fn multiarc_svg(d: &ChordDiagram) -> String {
    let n = d.degrees.len();
    let corner = |k: usize| Complex::from_polar(8.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.5 * std::f64::consts::PI);
    let place = |edge: usize, slot: usize| {
        let t = (slot + 1) as f64 / (d.degrees[edge] + 1) as f64;
        if n >= 3 {
            corner(edge) + (corner(edge + 1) - corner(edge)) * t
        } else {
            // Too few sides for a polygon: use arcs of the circle instead.
            let a = 2.0 * std::f64::consts::PI * (edge as f64 + t) / n as f64 + 0.5 * std::f64::consts::PI;
            Complex::from_polar(8.0, a)
        }
    };
    let mut svg = Svg::new();
    if n >= 3 {
        let corners: Vec<Complex> = (0..=n).map(corner).collect();
        svg.polygon(&corners, "black");
    } else {
        svg.circle(Complex::new(0.0, 0.0), 8.0, "black", "none");
    }
    for (a, b) in &d.chords {
        svg.line(place(a.edge, a.slot), place(b.edge, b.slot), "#d62728");
    }
    for (edge, &k) in d.degrees.iter().enumerate() {
        for slot in 0..k {
            svg.point(place(edge, slot), "black");
        }
    }
    svg.finish()
}

fn cmd_graft_verify(cli: &Cli, input: &Path) -> anyhow::Result<Report> {
    require_format(cli, &[Format::Text], "graft verify")?;
    let mut doc: PresentationDoc = read_doc(input)?;
    if cli.tol.is_some() {
        doc.group.tol = cli.tol;
    }
    let parts = match doc.to_parts() {
        Ok(p) => p,
        Err(e) => return Ok(Report::fail(format!("FAIL document {e}\nRESULT FAIL document\n"))),
    };
    let report = parts.verify();
    let mut out = report.to_string();
    let arcs: usize = parts.loops.iter().map(|l| l.carrier.len()).sum();
    for p in &parts.pieces {
        let degrees: Vec<String> = p.degrees().iter().map(u32::to_string).collect();
        writeln!(out, "PIECE {} degrees={} chi={}", p.id(), degrees.join(","), p.euler_characteristic())?;
    }
    writeln!(
        out,
        "SUMMARY genus={} chi={} pieces={} meridians={} loops={} arcs={arcs}",
        parts.genus,
        parts.euler_characteristic(),
        parts.pieces.len(),
        parts.gluing.len(),
        parts.loops.len()
    )?;
    match report.first_failure() {
        None => {
            out.push_str("RESULT PASS\n");
            Ok(Report::pass(out))
        }
        Some(check) => {
            let kind = check.error.as_ref().map(error_kind).unwrap_or_default();
            writeln!(out, "RESULT FAIL {} {kind}", check.name)?;
            Ok(Report::fail(out))
        }
    }
}

// Variant name of an error, e.g. `EndpointMismatch`.
fn error_kind<E: std::fmt::Debug>(e: &E) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or_default().to_string()
}

fn parse_pair(s: &str) -> anyhow::Result<Complex> {
    let (x, y) = s.split_once(',').ok_or_else(|| anyhow!("expected x,y but got {s:?}"))?;
    let x: f64 = x.trim().parse().with_context(|| format!("bad number {x:?}"))?;
    let y: f64 = y.trim().parse().with_context(|| format!("bad number {y:?}"))?;
    Ok(Complex::new(x, y))
}

fn parse_base(circle: Option<&str>, polygon: Option<&str>) -> anyhow::Result<BaseLoop> {
    match (circle, polygon) {
        (Some(c), None) => {
            let v: Vec<f64> = c
                .split(',')
                .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number {t:?} in --circle")))
                .collect::<anyhow::Result<_>>()?;
            let [cx, cy, r] = v[..] else {
                bail!("--circle expects cx,cy,r");
            };
            if !(r > 0.0 && r.is_finite()) {
                bail!("--circle radius must be positive");
            }
            Ok(BaseLoop::Circle { center: Complex::new(cx, cy), radius: r })
        }
        (None, Some(p)) => {
            let verts: Vec<Complex> = p.split(';').map(parse_pair).collect::<anyhow::Result<_>>()?;
            if verts.len() < 3 {
                bail!("--polygon needs at least three vertices");
            }
            Ok(BaseLoop::Polygon(verts))
        }
        _ => bail!("give exactly one of --circle or --polygon"),
    }
}

fn cmd_preimage(
    cli: &Cli,
    map: &str,
    circle: Option<&str>,
    polygon: Option<&str>,
    samples: usize,
    marked: &[String],
) -> anyhow::Result<Report> {
    let f = brancov::parse_map(map).with_context(|| format!("parsing map {map:?}"))?;
    let base = parse_base(circle, polygon)?;
    if samples < 3 {
        bail!("--samples must be at least 3");
    }
    let marked: Vec<SpherePoint> = if marked.is_empty() {
        match brancov::ramification_profile(&f) {
            Ok(p) => p.into_iter().map(|(z, _)| z).collect(),
            Err(e) => return Ok(Report::fail(format!("FAIL ramification {e}\n"))),
        }
    } else {
        marked
            .iter()
            .map(|m| if m.trim() == "inf" { Ok(SpherePoint::INFINITY) } else { parse_pair(m).map(SpherePoint::finite) })
            .collect::<anyhow::Result<_>>()?
    };
    let opts = PreimageOptions { margin: cli.tol.unwrap_or(PreimageOptions::default().margin), ..PreimageOptions::default() };
    let pre = match brancov::preimage_loop(&f, &base, samples, opts) {
        Ok(p) => p,
        Err(e) => return Ok(Report::fail(format!("FAIL preimage {e}\n"))),
    };
    let essential = match brancov::essential_part(&pre.components, &marked) {
        Ok(e) => e,
        Err(e) => return Ok(Report::fail(format!("FAIL essential {e}\n"))),
    };
    match cli.format {
        Format::Text => {
            let mut out = format!("degree {}\ncomponents {}\n", f.degree(), pre.components.len());
            let perm: Vec<String> = pre.monodromy.iter().map(usize::to_string).collect();
            writeln!(out, "monodromy {}", perm.join(" "))?;
            let labels: Vec<String> = marked.iter().map(point_label).collect();
            writeln!(out, "marked {}", labels.join(" "))?;
            for (i, c) in pre.components.iter().enumerate() {
                let w: Vec<String> = match marked.iter().map(|m| c.winding_number(m).map(|k| k.to_string())).collect() {
                    Ok(w) => w,
                    Err(e) => return Ok(Report::fail(format!("FAIL winding {e}\n"))),
                };
                let is_essential = essential.contains(c);
                writeln!(
                    out,
                    "component {i} points={} closure={:.3e} windings={} essential={}",
                    c.points.len(),
                    c.closure_error(),
                    w.join(","),
                    if is_essential { "yes" } else { "no" }
                )?;
            }
            writeln!(out, "essential {}", essential.len())?;
            Ok(Report::pass(out))
        }
        Format::Csv => {
            let mut out = String::from("component,index,x,y\n");
            for (i, c) in pre.components.iter().enumerate() {
                for (k, p) in c.points.iter().enumerate() {
                    match p.to_complex() {
                        Some(z) => writeln!(out, "{i},{k},{},{}", fixed(z.re, 12), fixed(z.im, 12))?,
                        None => writeln!(out, "{i},{k},inf,inf")?,
                    }
                }
            }
            Ok(Report::pass(out))
        }
        Format::Svg => {
            let mut svg = Svg::new();
            let base_pts: Vec<Complex> = base.trace(samples).points.iter().filter_map(|p| p.to_complex()).collect();
            svg.polygon(&base_pts, "#999999");
            for (i, c) in pre.components.iter().enumerate() {
                let pts: Vec<Complex> = c.points.iter().map(|p| p.to_complex().unwrap_or(Complex::new(f64::INFINITY, 0.0))).collect();
                svg.polygon(&pts, depth_color(i));
            }
            for m in &marked {
                if let Some(z) = m.to_complex() {
                    svg.point(z, "black");
                }
            }
            Ok(Report::pass(svg.finish()))
        }
    }
}
