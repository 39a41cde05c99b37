//! `pmtree novelty`: stream samples through a calibrated index, report
//! scores, and escape-insert novel inputs.

use std::path::PathBuf;

use clap::Args;
use pmtree::io::index_file::{load_index, save_index, ModelBundle};
use pmtree::io::vectors::read_vectors_file;
use pmtree::novelty::{continual_loop, EscapeAction};
use pmtree::Result;

use crate::settings::Config;

#[derive(Debug, Args)]
pub struct NoveltyArgs {
    /// Index file built with --novelty.
    #[arg(long, value_name = "FILE")]
    pub index: PathBuf,

    /// Stream vector file, scored in row order.
    #[arg(long, value_name = "FILE")]
    pub stream: PathBuf,

    /// Line-delimited JSON escape audit log.
    #[arg(long, value_name = "FILE")]
    pub escape_log: Option<PathBuf>,

    /// Write the post-stream model (inserted points, added atoms) here.
    #[arg(long, value_name = "FILE")]
    pub save_updated: Option<PathBuf>,

    /// Report file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn run(args: NoveltyArgs, _cfg: &Config) -> Result<()> {
    let bundle = load_index(&args.index)?;
    let mut model = bundle.novelty_model()?;
    let stream = read_vectors_file(&args.stream)?;
    let (reports, events) = continual_loop(&mut model, &stream)?;

    let mut table = String::from("sample\tresidual\toccupancy\tscore\tnovel\tactions\n");
    let mut pending = events.iter();
    for (i, report) in reports.iter().enumerate() {
        let actions = if report.is_novel {
            let event = pending.next().expect("one escape event per novel report");
            describe_actions(event.actions())
        } else {
            String::from("-")
        };
        table.push_str(&format!(
            "{i}\t{:.6}\t{}\t{:.6}\t{}\t{}\n",
            report.residual,
            report.cell_occupancy,
            report.score,
            u8::from(report.is_novel),
            actions,
        ));
    }
    crate::commands::write_output(args.out.as_deref(), &table)?;

    if let Some(path) = &args.escape_log {
        let mut log = String::new();
        for event in &events {
            log.push_str(&event.to_json_line()?);
            log.push('\n');
        }
        std::fs::write(path, log)?;
    }
    if let Some(path) = &args.save_updated {
        // Escapes may have grown the database, so the original per-point
        // labels no longer line up; the updated bundle drops them.
        save_index(path, &ModelBundle::from_novelty_model(&model, None))?;
    }
    eprintln!(
        "scored {} samples: {} novel, {} escapes",
        reports.len(),
        reports.iter().filter(|r| r.is_novel).count(),
        events.len()
    );
    Ok(())
}

fn describe_actions(actions: &[EscapeAction]) -> String {
    if actions.is_empty() {
        return String::from("none");
    }
    let parts: Vec<&str> = actions
        .iter()
        .map(|a| match a {
            EscapeAction::InsertedIntoTree => "tree",
            EscapeAction::AddedAtom => "atom",
        })
        .collect();
    parts.join("+")
}
