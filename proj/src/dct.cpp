#include "hidcode/dct.hpp"

#include <cmath>

namespace hidcode {

namespace {

// basis[u][x] = C(u) * cos((2x+1) u pi / 16), C(0)=sqrt(1/8), C(u>0)=sqrt(2/8)
struct Basis {
    float b[8][8];
    Basis() {
        const double pi = 3.14159265358979323846;
        for (int u = 0; u < 8; ++u) {
            double c = (u == 0) ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x)
                b[u][x] = static_cast<float>(c * std::cos((2 * x + 1) * u * pi / 16.0));
        }
    }
};

const Basis kBasis;

}  // namespace

void dct8x8_forward(const float* in, float* out) {
    float tmp[64];
    // rows: spatial x -> frequency u
    for (int y = 0; y < 8; ++y)
        for (int u = 0; u < 8; ++u) {
            float acc = 0.0f;
            for (int x = 0; x < 8; ++x) acc += kBasis.b[u][x] * in[y * 8 + x];
            tmp[y * 8 + u] = acc;
        }
    // columns: spatial y -> frequency v
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            float acc = 0.0f;
            for (int y = 0; y < 8; ++y) acc += kBasis.b[v][y] * tmp[y * 8 + u];
            out[v * 8 + u] = acc;
        }
}

void dct8x8_inverse(const float* in, float* out) {
    float tmp[64];
    for (int u = 0; u < 8; ++u)
        for (int y = 0; y < 8; ++y) {
            float acc = 0.0f;
            for (int v = 0; v < 8; ++v) acc += kBasis.b[v][y] * in[v * 8 + u];
            tmp[y * 8 + u] = acc;
        }
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            float acc = 0.0f;
            for (int u = 0; u < 8; ++u) acc += kBasis.b[u][x] * tmp[y * 8 + u];
            out[y * 8 + x] = acc;
        }
}

}  // namespace hidcode
