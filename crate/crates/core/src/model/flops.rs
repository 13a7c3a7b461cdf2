use crate::error::Result;

use super::config::ModelConfig;

pub fn conv_flops(kernel: usize, cin: usize, cout: usize, groups: usize, out_len: usize) -> u64 {
    2 * (kernel * (cin / groups) * cout * out_len) as u64
}

pub fn conv_params(kernel: usize, cin: usize, cout: usize, groups: usize) -> u64 {
    (kernel * (cin / groups) * cout + cout) as u64
}

pub fn dense_flops(din: usize, dout: usize) -> u64 {
    2 * (din * dout) as u64
}

pub fn dense_params(din: usize, dout: usize) -> u64 {
    (din * dout + dout) as u64
}

/// Per-item multiply-add count of convolutions and dense layers, read off
/// the layer shapes. Normalization, activations and pooling are not counted.
pub fn count_flops(config: &ModelConfig) -> Result<u64> {
    config.validate()?;
    let lens = config.stem_lengths()?;
    let mut cin = 1;
    let mut total = 0;
    for i in 0..3 {
        let cout = config.stem_filters[i];
        total += conv_flops(config.stem_kernels[i], cin, cout, 1, lens[i]);
        cin = cout;
    }
    for b in config.block_plan()? {
        let l = b.out_len;
        total += conv_flops(3, b.in_channels, b.bottleneck, 1, l);
        total += conv_flops(3, b.bottleneck, b.bottleneck, b.groups, l);
        total += conv_flops(3, b.bottleneck, b.out_channels, 1, l);
        if config.use_se {
            let r = b.out_channels / config.se_reduction;
            total += dense_flops(b.out_channels, r) + dense_flops(r, b.out_channels);
        }
        if b.projection {
            total += conv_flops(1, b.in_channels, b.out_channels, 1, l);
        }
    }
    let last = *config.stage_widths.last().expect("validated");
    total += dense_flops(last, config.head_hidden) + dense_flops(config.head_hidden, 1);
    Ok(total)
}

/// Trainable parameter count from the configuration alone.
pub fn count_params(config: &ModelConfig) -> Result<u64> {
    config.validate()?;
    let bn = |c: usize| 2 * c as u64;
    let [f1, f2, f3] = config.stem_filters;
    let [k1, k2, k3] = config.stem_kernels;
    let mut total = conv_params(k1, 1, f1, 1)
        + bn(f1)
        + conv_params(k2, f1, f2, 1)
        + bn(f2)
        + conv_params(k3, f2, f3, 1)
        + bn(f3);
    for b in config.block_plan()? {
        total += bn(b.in_channels) + conv_params(3, b.in_channels, b.bottleneck, 1);
        total += bn(b.bottleneck) + conv_params(3, b.bottleneck, b.bottleneck, b.groups);
        total += bn(b.bottleneck) + conv_params(3, b.bottleneck, b.out_channels, 1);
        if config.use_se {
            let r = b.out_channels / config.se_reduction;
            total += dense_params(b.out_channels, r) + dense_params(r, b.out_channels);
        }
        if b.projection {
            total += conv_params(1, b.in_channels, b.out_channels, 1);
        }
    }
    let last = *config.stage_widths.last().expect("validated");
    total += bn(last) + dense_params(last, config.head_hidden) + dense_params(config.head_hidden, 1);
    Ok(total)
}
