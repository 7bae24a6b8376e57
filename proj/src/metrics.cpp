#include "nlh/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace nlh {

VectorField central_gradient(const ImageGrid& img) {
    const int w = img.width();
    const int h = img.height();
    if (w < 3 || h < 3) throw Error("central_gradient: image must be at least 3x3");
    const double inv = 1.0 / img.spacing();
    VectorField g{ImageGrid(w, h, 0.0, img.spacing()), ImageGrid(w, h, 0.0, img.spacing())};
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
            double gx = 0.0;
            if (ix == 0) {
                gx = img(1, iy) - img(0, iy);
            } else if (ix == w - 1) {
                gx = img(w - 1, iy) - img(w - 2, iy);
            } else {
                gx = 0.5 * (img(ix + 1, iy) - img(ix - 1, iy));
            }
            double gy = 0.0;
            if (iy == 0) {
                gy = img(ix, 1) - img(ix, 0);
            } else if (iy == h - 1) {
                gy = img(ix, h - 1) - img(ix, h - 2);
            } else {
                gy = 0.5 * (img(ix, iy + 1) - img(ix, iy - 1));
            }
            g.x(ix, iy) = gx * inv;
            g.y(ix, iy) = gy * inv;
        }
    }
    return g;
}

double mean_squared_error(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "mean_squared_error");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

double psnr(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "psnr");
    const double mse = mean_squared_error(a, b);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageGrid& a, const ImageGrid& b) {
    require_same_shape(a, b, "ssim");
    const int w = a.width();
    const int h = a.height();
    if (w < kSsimWindow || h < kSsimWindow) {
        throw Error("ssim: image must be at least 11x11");
    }

    constexpr int r = kSsimWindow / 2;
    std::array<double, kSsimWindow * kSsimWindow> win{};
    double total = 0.0;
    for (int j = -r; j <= r; ++j) {
        for (int i = -r; i <= r; ++i) {
            const double v = std::exp(-(i * i + j * j) / (2.0 * kSsimSigma * kSsimSigma));
            win[(j + r) * kSsimWindow + (i + r)] = v;
            total += v;
        }
    }
    for (double& v : win) v /= total;

    double acc = 0.0;
    long count = 0;
    for (int cy = r; cy < h - r; ++cy) {
        for (int cx = r; cx < w - r; ++cx) {
            double mu_a = 0.0;
            double mu_b = 0.0;
            for (int j = -r; j <= r; ++j) {
                for (int i = -r; i <= r; ++i) {
                    const double wt = win[(j + r) * kSsimWindow + (i + r)];
                    mu_a += wt * a(cx + i, cy + j);
                    mu_b += wt * b(cx + i, cy + j);
                }
            }
            double var_a = 0.0;
            double var_b = 0.0;
            double cov = 0.0;
            for (int j = -r; j <= r; ++j) {
                for (int i = -r; i <= r; ++i) {
                    const double wt = win[(j + r) * kSsimWindow + (i + r)];
                    const double da = a(cx + i, cy + j) - mu_a;
                    const double db = b(cx + i, cy + j) - mu_b;
                    var_a += wt * da * da;
                    var_b += wt * db * db;
                    cov += wt * da * db;
                }
            }
            const double num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
            const double den = (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
            acc += num / den;
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

SecondDifferenceStats second_difference_stats(const ImageGrid& img, double zero_tol) {
    const int w = img.width(), h = img.height();
    if (w < 3 || h < 3) throw Error("second_difference_stats: image must be at least 3x3");
    SecondDifferenceStats st;
    st.values.reserve(2 * static_cast<std::size_t>(w - 2) * static_cast<std::size_t>(h - 2));
    for (int iy = 1; iy < h - 1; ++iy) {
        for (int ix = 1; ix < w - 1; ++ix) {
            st.values.push_back(img(ix + 1, iy) - 2.0 * img(ix, iy) + img(ix - 1, iy));
            st.values.push_back(img(ix, iy + 1) - 2.0 * img(ix, iy) + img(ix, iy - 1));
        }
    }
    const double n = static_cast<double>(st.values.size());
    double mean = 0.0;
    std::size_t zeros = 0;
    for (double v : st.values) {
        mean += v;
        if (std::abs(v) <= zero_tol) ++zeros;
    }
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : st.values) {
        const double d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    st.zero_fraction = static_cast<double>(zeros) / n;
    // A sample entirely within zero_tol is flat; its moments are rounding noise.
    st.excess_kurtosis = zeros < st.values.size() ? m4 / (m2 * m2) - 3.0 : 0.0;
    return st;
}

}  // namespace nlh
