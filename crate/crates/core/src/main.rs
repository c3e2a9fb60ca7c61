use std::process::ExitCode;

fn main() -> ExitCode {
    // CROBSTRUCT_THREADS caps the rayon worker pool used for independent
    // table entries and relation-search columns.
    if let Ok(v) = std::env::var("CROBSTRUCT_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = crobstruct::frontend::run(&args);
    print!("{}", result.output);
    ExitCode::from(result.exit_code as u8)
}
