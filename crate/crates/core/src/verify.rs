//! Finite-difference gradient suites over every block of the network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{fsas, FsasParams};
use crate::autodiff::{finite_diff_check, FiniteDiffOptions, GradReport, Tape, TapeParams, Var};
use crate::error::Result;
use crate::exec::Exec;
use crate::ffn::{dffn, ffn, DffnParams, FfnParams};
use crate::network::{residual, FfnVariant, FsasPlacement, Model, NetworkConfig, NetworkParams};
use crate::ops::ConvParams;
use crate::params::{self, materialize, Binder, Init, ParamSpec, ParameterStore};
use crate::tensor::Tensor;

/// One named gradient check.
#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub block: String,
    pub report: GradReport,
}

fn jittered(specs: &[ParamSpec], rng: &mut ChaCha8Rng) -> Result<ParameterStore<f64>> {
    // ones/zeros initializers become random, centred on their usual value
    let random: Vec<ParamSpec> = specs
        .iter()
        .map(|s| match s.init {
            Init::FanIn(_) => s.clone(),
            _ => ParamSpec::new(s.name.clone(), &s.shape, Init::FanIn(1)),
        })
        .collect();
    let mut store = materialize(&random, rng)?;
    for spec in specs.iter().filter(|s| s.init == Init::Ones) {
        for v in store.get_mut(&spec.name)?.data_mut() {
            *v += 1.0;
        }
    }
    Ok(store)
}

/// `sum(r * y)`: a readout with a dense, well-scaled gradient.
fn readout(tape: &mut Tape<f64>, y: &Var, r: &Tensor<f64>) -> Result<Var> {
    let rv = tape.constant(r.clone());
    let p = tape.mul(y, &rv)?;
    tape.sum(&p)
}

fn check_block<F>(
    name: &str,
    store: &ParameterStore<f64>,
    x: &Tensor<f64>,
    r: &Tensor<f64>,
    f: F,
    opts: &FiniteDiffOptions,
) -> Result<SuiteResult>
where
    F: Fn(&mut Tape<f64>, &TapeParams, &Var) -> Result<Var>,
{
    let report = finite_diff_check(
        store,
        |tape, p| {
            let xv = tape.constant(x.clone());
            let y = f(tape, p, &xv)?;
            readout(tape, &y, r)
        },
        opts,
    )?;
    Ok(SuiteResult {
        block: name.to_string(),
        report,
    })
}

/// Checks convs, norm, FSAS, DFFN and plain FFN at `channels` on a `size` x `size` input.
pub fn block_suite(
    channels: usize,
    size: usize,
    seed: u64,
    opts: &FiniteDiffOptions,
) -> Result<Vec<SuiteResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = [1, channels, size, size];
    let x = Tensor::<f64>::uniform(&shape, -1.0, 1.0, &mut rng)?;
    let r = Tensor::<f64>::uniform(&shape, -1.0, 1.0, &mut rng)?;
    let mut out = Vec::new();

    let mut specs = params::pointwise_specs("pw", channels, channels, true);
    specs.extend(params::depthwise_specs("dw", channels, true));
    let store = jittered(&specs, &mut rng)?;
    out.push(check_block(
        "conv",
        &store,
        &x,
        &r,
        |t, p, x| {
            let y = t.conv_pointwise(x, &ConvParams::bind(p, "pw")?)?;
            t.conv_depthwise3x3(&y, &ConvParams::bind(p, "dw")?)
        },
        opts,
    )?);

    let store = jittered(&params::norm_specs("norm", channels), &mut rng)?;
    out.push(check_block(
        "layer_norm",
        &store,
        &x,
        &r,
        |t, p, x| {
            let s = Binder::get(p, "norm.scale")?;
            let o = Binder::get(p, "norm.offset")?;
            t.layer_norm(x, &s, &o)
        },
        opts,
    )?);

    let store = jittered(&FsasParams::<()>::specs("fsas", channels), &mut rng)?;
    out.push(check_block(
        "fsas",
        &store,
        &x,
        &r,
        |t, p, x| fsas(t, x, &FsasParams::bind(p, "fsas", 8, Default::default())?),
        opts,
    )?);

    let store = jittered(&DffnParams::<()>::specs("dffn", channels, 2, 8)?, &mut rng)?;
    out.push(check_block(
        "dffn",
        &store,
        &x,
        &r,
        |t, p, x| dffn(t, x, &DffnParams::bind(p, "dffn", 8)?),
        opts,
    )?);

    let store = jittered(&FfnParams::<()>::specs("ffn", channels, 2)?, &mut rng)?;
    out.push(check_block(
        "plain_ffn",
        &store,
        &x,
        &r,
        |t, p, x| ffn(t, x, &FfnParams::bind(p, "ffn")?),
        opts,
    )?);
    Ok(out)
}

/// Checks the whole network of `cfg` on a `[1, 3, size, size]` input, with
/// parameters jittered away from the identity initialization.
pub fn network_check(
    cfg: &NetworkConfig,
    size: usize,
    seed: u64,
    opts: &FiniteDiffOptions,
) -> Result<SuiteResult> {
    let mut model = Model::<f64>::build(cfg.clone(), seed)?;
    model.jitter(0.1, seed.wrapping_add(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let x = Tensor::<f64>::uniform(&[1, 3, size, size], 0.0, 1.0, &mut rng)?;
    let r = Tensor::<f64>::uniform(&[1, 3, size, size], -1.0, 1.0, &mut rng)?;
    let report = finite_diff_check(
        &model.params,
        |tape, p| {
            let np = NetworkParams::bind(cfg, p)?;
            let xv = tape.constant(x.clone());
            let y = residual(tape, cfg, &np, &xv)?;
            readout(tape, &y, &r)
        },
        opts,
    )?;
    Ok(SuiteResult {
        block: format!("network[{}/{}]", cfg.fsas_placement, cfg.ffn_variant),
        report,
    })
}

/// Every placement x variant combination at micro scale.
pub fn ablation_configs(base: &NetworkConfig) -> Vec<NetworkConfig> {
    let mut v = Vec::new();
    for variant in FfnVariant::ALL {
        for placement in FsasPlacement::ALL {
            v.push(NetworkConfig {
                fsas_placement: placement,
                ffn_variant: variant,
                ..base.clone()
            });
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_pass() {
        for res in block_suite(2, 8, 1, &FiniteDiffOptions::default()).unwrap() {
            assert!(res.report.passed(), "{}\n{}", res.block, res.report);
        }
    }

    #[test]
    fn micro_network_passes() {
        let res = network_check(
            &NetworkConfig::micro(),
            16,
            0,
            &FiniteDiffOptions::default(),
        )
        .unwrap();
        assert!(res.report.passed(), "{}", res.report);
    }

    #[test]
    fn corrupted_adjoint_fails() {
        let opts = FiniteDiffOptions {
            corrupt_op: Some("layer_norm".into()),
            ..Default::default()
        };
        let res = block_suite(2, 8, 1, &opts).unwrap();
        let norm = res.iter().find(|r| r.block == "layer_norm").unwrap();
        assert!(norm.report.worst().unwrap().max_rel_err > 0.5);
    }
}
