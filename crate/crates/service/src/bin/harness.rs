use std::process::ExitCode;

use anyhow::{bail, Context};
use quota_service::harness::{self, bench, scenario::Scenario};

const USAGE: &str = "usage: harness run <scenario-file>\n       harness bench --files N [--scanner] [--rounds R]";

fn run(args: &[String]) -> anyhow::Result<bool> {
    match args.first().map(String::as_str) {
        Some("run") => {
            let [_, path] = args else { bail!("{USAGE}") };
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            let scenario: Scenario = text.parse().with_context(|| format!("parsing {path}"))?;
            let report = harness::run_scenario(&scenario);
            print!("{report}");
            Ok(report.passed())
        }
        Some("bench") => {
            let mut files = 10_000;
            let mut rounds = 1;
            let mut scanner = false;
            let mut it = args[1..].iter();
            while let Some(arg) = it.next() {
                match arg.as_str() {
                    "--files" => files = it.next().context("--files needs a value")?.parse().context("--files")?,
                    "--rounds" => rounds = it.next().context("--rounds needs a value")?.parse().context("--rounds")?,
                    "--scanner" => scanner = true,
                    other => bail!("unknown argument {other:?}\n{USAGE}"),
                }
            }
            if scanner {
                println!("{}", bench::compare(files, rounds));
            } else {
                let (base, _) = bench::measure_create_latency(files, bench::Variant::BASELINE);
                let (quota, stats) = bench::measure_create_latency(files, bench::Variant::QUOTAS);
                println!("baseline  {base}");
                println!("quotas    {quota}");
                println!("max traversals per create: {}", stats.max_traversals_per_create);
            }
            Ok(true)
        }
        _ => bail!("{USAGE}"),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
