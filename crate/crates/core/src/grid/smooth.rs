use crate::error::{Error, Result};

/// Normalized `size x size` Gaussian kernel, row-major, centered.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size % 2 == 0 {
        return Err(Error::InvalidKernel(format!("kernel size {size} must be odd")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidKernel(format!("sigma {sigma} must be positive")));
    }
    let r = (size / 2) as isize;
    let mut k = Vec::with_capacity(size * size);
    for dx in -r..=r {
        for dy in -r..=r {
            k.push((-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Toroidal convolution of a row-major `ex x ey` field with a truncated,
/// renormalized Gaussian. The output has the same total mass as the input.
pub fn gaussian_smooth(
    field: &[f64],
    extents: (usize, usize),
    kernel_size: usize,
    sigma: f64,
) -> Result<Vec<f64>> {
    let (ex, ey) = extents;
    if field.len() != ex * ey {
        return Err(Error::DimensionMismatch {
            expected: ex * ey,
            actual: field.len(),
        });
    }
    let kernel = gaussian_kernel(kernel_size, sigma)?;
    let r = (kernel_size / 2) as isize;
    let (exi, eyi) = (ex as isize, ey as isize);
    let mut out = vec![0.0; field.len()];
    for x in 0..exi {
        for y in 0..eyi {
            let mut acc = 0.0;
            let mut k = 0;
            for dx in -r..=r {
                let sx = (x - dx).rem_euclid(exi) as usize;
                for dy in -r..=r {
                    let sy = (y - dy).rem_euclid(eyi) as usize;
                    acc += kernel[k] * field[sx * ey + sy];
                    k += 1;
                }
            }
            out[(x * eyi + y) as usize] = acc;
        }
    }
    Ok(out)
}
