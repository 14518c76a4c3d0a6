//! Image codecs, rendering and run reports.

mod font;
mod pnm;
mod render;
mod report;

pub use pnm::{decode_pnm, decode_raster, encode_pnm, encode_raster, read_image, read_raster, write_image, write_raster, Raster};
pub use render::{colorize, render_bars, render_saliency, Colormap, RenderSpec, NEGATIVE_COLOR, POSITIVE_COLOR};
pub use report::{strip_timestamp, Report, REPORT_VERSION};
