#pragma once

#include <array>

#include "facemotion/eval/vertex_model.hpp"

namespace facemotion::eval {

using nn::Mat;

// Frechet distance between Gaussian fits of two feature sets (rows = samples):
// ||mu_A - mu_B||^2 + tr(S_A + S_B - 2 (S_A S_B)^{1/2}). Covariances are
// regularized by eps*I; the matrix square root uses eigendecomposition with
// negative eigenvalues clipped at -1e-8.
double fid(const Mat& features_a, const Mat& features_b, double eps = 1e-6);

struct RPrecision {
    double top1 = 0.0;
    double top2 = 0.0;
    double top3 = 0.0;
};

// Average over seeded random batches of `batch` pairs: fraction of queries
// whose true partner ranks in the Euclidean top-n within the batch.
RPrecision r_precision(const Mat& queries, const Mat& gallery, int batch = 32,
                       int n_batches = 100, uint64_t seed = 0);

// Mean Euclidean distance over aligned pairs.
double matching_score(const Mat& a, const Mat& b);

// Mean distance over `pairs` seeded random pairs (no self-pairs).
double diversity(const Mat& embeddings, int pairs = 300, uint64_t seed = 0);

// Lip Vertex Error / Face Vertex Error between two equal-length sequences:
// per frame, max over lip vertices / mean over face vertices of the L2 vertex
// displacement, averaged over frames. Units follow the vertex model (mm).
std::pair<double, double> lve_fve(const data::MotionSequence& gt,
                                  const data::MotionSequence& pred, const VertexModel& vm);

}  // namespace facemotion::eval
