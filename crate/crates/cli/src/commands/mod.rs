pub mod allocate;
pub mod simulate;
pub mod sweep;
pub mod verify;

use harq_core::{BlocklengthSpec, Rate, RateSpec};

use crate::args::RateArgs;
use crate::CliError;

pub(crate) fn rate_spec(args: &RateArgs) -> Result<RateSpec, CliError> {
    match (args.rate, args.blocklength, args.nats) {
        (Some(r), None, None) => Ok(Rate::new(r)?.into()),
        (None, Some(n), Some(k)) => Ok(BlocklengthSpec::new(n, k)?.into()),
        _ => Err(CliError::Usage("give --rate, or --blocklength with --nats".into())),
    }
}

/// Round-trips a value through its printed form so that derived quantities
/// are computed from exactly what the user sees.
pub(crate) fn as_printed(x: f64) -> f64 {
    x.to_string().parse().expect("f64 display parses")
}
