use crate::error::{Error, Result};
use crate::image::{resize, Image};

/// Smallest side allowed at the coarsest level.
const MIN_SIDE: usize = 8;

/// Builds a Gaussian pyramid, finest level first: `levels[0]` is the input and
/// each next level is low-passed and resampled by `scale`.
pub fn gaussian_pyramid(img: &Image, levels: usize, scale: f64) -> Result<Vec<Image>> {
    if levels < 1 || !(scale > 0.0 && scale < 1.0) {
        return Err(Error::Config(format!(
            "pyramid needs levels >= 1 and scale in (0,1), got {levels} and {scale}"
        )));
    }
    let mut out = vec![img.clone()];
    for _ in 1..levels {
        let prev = out.last().expect("nonempty");
        let w = (prev.width() as f64 * scale).round() as usize;
        let h = (prev.height() as f64 * scale).round() as usize;
        if w < MIN_SIDE || h < MIN_SIDE {
            return Err(Error::Dimensions {
                width: img.width(),
                height: img.height(),
                reason: format!("too small for a {levels}-level pyramid at scale {scale}"),
            });
        }
        out.push(resize(prev, w, h)?);
    }
    Ok(out)
}
