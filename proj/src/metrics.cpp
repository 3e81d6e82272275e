#include "drpnn/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace drpnn {

namespace {

constexpr double kRadToDeg = 57.29577951308232;

void check_same_dims(const TensorF& fused, const TensorF& reference, const char* op) {
    if (!fused.same_dims(reference)) {
        throw std::invalid_argument(std::string(op) + ": dims " + fused.dims().str() + " vs " +
                                    reference.dims().str());
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// 3x3 Laplacian high-pass with zero padding, double output.
std::vector<double> laplacian(const TensorF& img, int n, int c) {
    const Dims d = img.dims();
    std::vector<double> out(static_cast<std::size_t>(d.h) * d.w, 0.0);
    for (int y = 0; y < d.h; ++y) {
        for (int x = 0; x < d.w; ++x) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= d.h || xx < 0 || xx >= d.w) continue;
                    const double v = img(n, c, yy, xx);
                    acc += (dy == 0 && dx == 0) ? 8.0 * v : -v;
                }
            }
            out[static_cast<std::size_t>(y) * d.w + x] = acc;
        }
    }
    return out;
}

}  // namespace

double q_index(const TensorF& fused, const TensorF& reference, int window) {
    check_same_dims(fused, reference, "q_index");
    const Dims d = fused.dims();
    if (window < 2) throw std::invalid_argument("q_index: window must be >= 2");
    if (window > d.h || window > d.w) {
        throw std::invalid_argument("q_index: window " + std::to_string(window) +
                                    " larger than image " + std::to_string(d.h) + "x" +
                                    std::to_string(d.w));
    }
    const int by_count = d.h / window;
    const int bx_count = d.w / window;
    const double npix = static_cast<double>(window) * window;

    double band_sum = 0.0;
    int band_count = 0;
    for (int n = 0; n < d.n; ++n) {
        for (int c = 0; c < d.c; ++c) {
            double block_sum = 0.0;
            int block_count = 0;
            for (int by = 0; by < by_count; ++by) {
                for (int bx = 0; bx < bx_count; ++bx) {
                    double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
                    for (int y = by * window; y < (by + 1) * window; ++y) {
                        const float* fr = fused.row(n, c, y) + bx * window;
                        const float* rr = reference.row(n, c, y) + bx * window;
                        for (int x = 0; x < window; ++x) {
                            const double fv = fr[x], rv = rr[x];
                            sx += fv;
                            sy += rv;
                            sxx += fv * fv;
                            syy += rv * rv;
                            sxy += fv * rv;
                        }
                    }
                    const double mx = sx / npix, my = sy / npix;
                    const double vx = sxx / npix - mx * mx;
                    const double vy = syy / npix - my * my;
                    const double cov = sxy / npix - mx * my;
                    const double var_term = vx + vy;
                    const double mean_term = mx * mx + my * my;
                    if (var_term == 0.0) {
                        // Both blocks constant: identical means count as a
                        // perfect match, differing means as a total miss.
                        block_sum += (mx == my) ? 1.0 : 0.0;
                        ++block_count;
                    } else if (mean_term == 0.0) {
                        continue;  // denominator vanishes; block is skipped
                    } else {
                        block_sum += (4.0 * cov * mx * my) / (var_term * mean_term);
                        ++block_count;
                    }
                }
            }
            if (block_count > 0) {
                band_sum += block_sum / block_count;
                ++band_count;
            }
        }
    }
    if (band_count == 0) throw std::runtime_error("q_index: every block was degenerate");
    return band_sum / band_count;
}

double ergas(const TensorF& fused, const TensorF& reference, int scale) {
    check_same_dims(fused, reference, "ergas");
    if (scale < 2) throw std::invalid_argument("ergas: scale must be >= 2");
    const Dims d = fused.dims();
    const double npix = static_cast<double>(d.h) * d.w;

    double acc = 0.0;
    int bands = 0;
    for (int n = 0; n < d.n; ++n) {
        for (int c = 0; c < d.c; ++c) {
            double se = 0.0, ref_sum = 0.0;
            for (int y = 0; y < d.h; ++y) {
                const float* fr = fused.row(n, c, y);
                const float* rr = reference.row(n, c, y);
                for (int x = 0; x < d.w; ++x) {
                    const double diff = static_cast<double>(fr[x]) - rr[x];
                    se += diff * diff;
                    ref_sum += rr[x];
                }
            }
            const double mean = ref_sum / npix;
            if (mean == 0.0) {
                throw std::runtime_error("ergas: reference band " + std::to_string(c) +
                                         " has zero mean");
            }
            const double rmse = std::sqrt(se / npix);
            acc += (rmse / mean) * (rmse / mean);
            ++bands;
        }
    }
    return 100.0 / scale * std::sqrt(acc / bands);
}

double sam(const TensorF& fused, const TensorF& reference) {
    check_same_dims(fused, reference, "sam");
    const Dims d = fused.dims();
    if (d.c < 2) throw std::invalid_argument("sam: needs at least 2 spectral bands");

    double angle_sum = 0.0;
    std::int64_t counted = 0;
    for (int n = 0; n < d.n; ++n) {
        for (int y = 0; y < d.h; ++y) {
            for (int x = 0; x < d.w; ++x) {
                double dot = 0.0, nf = 0.0, nr = 0.0;
                for (int c = 0; c < d.c; ++c) {
                    const double fv = fused(n, c, y, x);
                    const double rv = reference(n, c, y, x);
                    dot += fv * rv;
                    nf += fv * fv;
                    nr += rv * rv;
                }
                if (nf == 0.0 || nr == 0.0) continue;
                double cosv = dot / std::sqrt(nf * nr);
                cosv = std::min(1.0, std::max(-1.0, cosv));
                angle_sum += std::acos(cosv) * kRadToDeg;
                ++counted;
            }
        }
    }
    if (counted == 0) throw std::runtime_error("sam: every pixel has a zero-norm spectral vector");
    return angle_sum / static_cast<double>(counted);
}

double scc(const TensorF& fused, const TensorF& reference) {
    const Dims fd = fused.dims();
    const Dims rd = reference.dims();
    const bool broadcast = rd.c == 1 && fd.c > 1;
    if (!broadcast) check_same_dims(fused, reference, "scc");
    if (broadcast && (rd.n != fd.n || rd.h != fd.h || rd.w != fd.w)) {
        throw std::invalid_argument("scc: reference dims " + rd.str() +
                                    " do not match fused dims " + fd.str());
    }
    if (fd.h < 3 || fd.w < 3) {
        throw std::invalid_argument("scc: image too small for the 3x3 high-pass filter");
    }

    double band_sum = 0.0;
    int band_count = 0;
    for (int n = 0; n < fd.n; ++n) {
        std::vector<double> ref_hp;
        if (broadcast) ref_hp = laplacian(reference, n, 0);
        for (int c = 0; c < fd.c; ++c) {
            const std::vector<double> f_hp = laplacian(fused, n, c);
            if (!broadcast) ref_hp = laplacian(reference, n, c);
            // Correlate where the filter support is complete; the border ring
            // responds to the padding, not to image structure.
            double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (int y = 1; y < fd.h - 1; ++y) {
                for (int x = 1; x < fd.w - 1; ++x) {
                    const double fv = f_hp[static_cast<std::size_t>(y) * fd.w + x];
                    const double rv = ref_hp[static_cast<std::size_t>(y) * fd.w + x];
                    sx += fv;
                    sy += rv;
                    sxx += fv * fv;
                    syy += rv * rv;
                    sxy += fv * rv;
                }
            }
            const double np = static_cast<double>(fd.h - 2) * (fd.w - 2);
            const double vf = sxx / np - (sx / np) * (sx / np);
            const double vr = syy / np - (sy / np) * (sy / np);
            const double cov = sxy / np - (sx / np) * (sy / np);
            if (vr <= 0.0) continue;  // constant filtered reference: skip band
            // A flat filtered fused band against a varying reference carries
            // no spatial agreement at all.
            band_sum += (vf <= 0.0) ? 0.0 : cov / std::sqrt(vf * vr);
            ++band_count;
        }
    }
    if (band_count == 0) throw std::runtime_error("scc: every band had a constant filtered reference");
    return band_sum / band_count;
}

MetricsReport evaluate_all(const TensorF& fused, const TensorF& reference, int scale, int window) {
    MetricsReport r;
    r.q = q_index(fused, reference, window);
    r.ergas = ergas(fused, reference, scale);
    r.sam_degrees = sam(fused, reference);
    r.scc = scc(fused, reference);
    r.scale = scale;
    r.bands = fused.dims().c;
    r.q_window = window;
    return r;
}

std::string MetricsReport::line_record() const {
    return "Q=" + fmt(q) + " ERGAS=" + fmt(ergas) + " SAM=" + fmt(sam_degrees) + " SCC=" + fmt(scc) +
           " scale=" + std::to_string(scale) + " bands=" + std::to_string(bands) +
           " q_window=" + std::to_string(q_window);
}

std::string MetricsReport::kv_record() const {
    std::string s;
    s += "q " + fmt(q) + "\n";
    s += "ergas " + fmt(ergas) + "\n";
    s += "sam_degrees " + fmt(sam_degrees) + "\n";
    s += "scc " + fmt(scc) + "\n";
    s += "scale " + std::to_string(scale) + "\n";
    s += "bands " + std::to_string(bands) + "\n";
    s += "q_window " + std::to_string(q_window) + "\n";
    return s;
}

}  // namespace drpnn
