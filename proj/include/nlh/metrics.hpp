#pragma once

#include <vector>

#include "nlh/image.hpp"

namespace nlh {

/// Central differences in the interior, one-sided at the border, scaled by
/// 1/spacing. Requires width, height >= 3.
VectorField central_gradient(const ImageGrid& img);

double mean_squared_error(const ImageGrid& a, const ImageGrid& b);

/// Peak signal-to-noise ratio with peak 1.0; +infinity when the images agree.
double psnr(const ImageGrid& a, const ImageGrid& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean structural similarity over all fully contained 11x11 Gaussian
/// windows (sigma 1.5), with the usual constants for a unit dynamic range.
double ssim(const ImageGrid& a, const ImageGrid& b);

/// Interior central second differences u_xx and u_yy pooled into one sample,
/// used to quantify staircasing: the sample of a staircased image piles up at
/// zero with a few large outliers at the steps.
struct SecondDifferenceStats {
    std::vector<double> values;
    /// Fraction of |value| <= zero_tol.
    double zero_fraction = 0.0;
    /// Fourth standardized moment minus 3; about 0 for a Gaussian sample and
    /// exactly 0 when every value is within zero_tol.
    double excess_kurtosis = 0.0;
};

SecondDifferenceStats second_difference_stats(const ImageGrid& img, double zero_tol);

}  // namespace nlh
