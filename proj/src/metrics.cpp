#include "hidcode/metrics.hpp"

#include <cmath>
#include <limits>

#include "hidcode/errors.hpp"

namespace hidcode {

double mse(const RasterImage& a, const RasterImage& b) {
    if (!a.same_shape(b)) throw ValidationError("mse: image dimensions differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double psnr(const RasterImage& a, const RasterImage& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / m);
}

double ssim(const RasterImage& a, const RasterImage& b) {
    if (!a.same_shape(b)) throw ValidationError("ssim: image dimensions differ");
    constexpr int win = 8;
    constexpr double c1 = 6.5025;    // (0.01*255)^2
    constexpr double c2 = 58.5225;   // (0.03*255)^2

    double total = 0.0;
    std::size_t count = 0;
    for (int ch = 0; ch < 3; ++ch) {
        for (int wy = 0; wy + win <= a.height; wy += win) {
            for (int wx = 0; wx + win <= a.width; wx += win) {
                double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
                for (int y = wy; y < wy + win; ++y) {
                    for (int x = wx; x < wx + win; ++x) {
                        const double va = a.at(y, x, ch);
                        const double vb = b.at(y, x, ch);
                        sx += va;
                        sy += vb;
                        sxx += va * va;
                        syy += vb * vb;
                        sxy += va * vb;
                    }
                }
                const double n = win * win;
                const double mx = sx / n;
                const double my = sy / n;
                const double vx = sxx / n - mx * mx;
                const double vy = syy / n - my * my;
                const double cov = sxy / n - mx * my;
                const double num = (2 * mx * my + c1) * (2 * cov + c2);
                const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
                total += num / den;
                ++count;
            }
        }
    }
    if (count == 0) throw ValidationError("ssim: image smaller than the 8x8 window");
    return total / static_cast<double>(count);
}

}  // namespace hidcode
