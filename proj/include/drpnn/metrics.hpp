#pragma once

#include <array>
#include <string>

#include "drpnn/tensor.hpp"

namespace drpnn {

// The four quantitative indices computed between a fused image and a
// reference, plus the conventions they were computed under.
struct MetricsReport {
    double q = 0.0;            // universal image quality index, in [-1, 1]
    double ergas = 0.0;        // relative dimensionless global error, >= 0
    double sam_degrees = 0.0;  // mean spectral angle, in [0, 180]
    double scc = 0.0;          // spatial correlation coefficient, in [-1, 1]
    int scale = 0;
    int bands = 0;
    int q_window = 0;

    // One-line record, column order Q, ERGAS, SAM, SCC.
    std::string line_record() const;
    // Key-value serialization, same column order followed by metadata.
    std::string kv_record() const;
};

// Universal image quality index averaged over non-overlapping window x window
// blocks, then over bands. Degenerate blocks: when both variances are zero
// the block contributes 1 if the means agree exactly and 0 otherwise; blocks
// where only the mean term vanishes are skipped.
double q_index(const TensorF& fused, const TensorF& reference, int window = 32);

// 100 * (1/scale) * sqrt(mean over bands of (RMSE_b / mean_b)^2). The band
// means come from the reference alone and must be nonzero.
double ergas(const TensorF& fused, const TensorF& reference, int scale);

// Mean per-pixel spectral angle in degrees. Pixels where either spectral
// vector has zero norm are excluded from the mean.
double sam(const TensorF& fused, const TensorF& reference);

// Per band: high-pass both images with the 3x3 Laplacian (zero padding),
// correlate, average over bands. A band whose filtered reference is constant
// is skipped. A 1-band reference (PAN) is compared against every fused band.
double scc(const TensorF& fused, const TensorF& reference);

MetricsReport evaluate_all(const TensorF& fused, const TensorF& reference, int scale,
                           int window = 32);

}  // namespace drpnn
