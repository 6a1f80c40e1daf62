use ddbridge_core::verify::{all_passed, run_suite, VerifyOptions};

use crate::failure::numerical;
use crate::Context;

pub fn run(_ctx: &Context, break_gamma_endpoint: bool) -> anyhow::Result<()> {
    let results = run_suite(VerifyOptions { break_gamma_endpoint });
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if all_passed(&results) {
        println!("all {} checks passed", results.len());
        Ok(())
    } else {
        Err(numerical(format!("{failed} of {} checks failed", results.len())))
    }
}
