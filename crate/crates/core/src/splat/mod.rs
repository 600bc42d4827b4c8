//! Isotropic Gaussian splatting: projection, compositing, loss and gradients.

mod backward;
mod camera;
mod frame;
mod gaussian;
mod loss;
mod render;
mod ssim;

pub use backward::{backward, GaussianGrad, Gradients};
pub use camera::{project, CameraIntrinsics, Pose, ProjectedGaussian, NEAR_PLANE};
pub use frame::{Frame, BACKGROUND_ALPHA, INVALID_DEPTH};
pub use gaussian::{Gaussian, GaussianId, GaussianMap};
pub use loss::{loss, loss_and_pixel_grads, LossWeights, PixelGrads};
pub use render::{render, MIN_TRANSMITTANCE, SUPPORT_SIGMAS};
pub use ssim::{ssim, ssim_plane, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};
