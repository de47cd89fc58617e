#include "facemotion/eval/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numeric>

namespace facemotion::eval {

namespace {
Mat covariance(const Mat& features, double eps) {
    const Eigen::Index n = features.rows();
    const Eigen::RowVectorXd mean = features.colwise().mean();
    const Mat centered = features.rowwise() - mean;
    Mat cov = centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(n - 1));
    cov.diagonal().array() += eps;
    return cov;
}

// Symmetric PSD square root via eigendecomposition, clipping tiny negatives.
Mat sqrtm_psd(const Mat& sym) {
    Eigen::SelfAdjointEigenSolver<Mat> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw EvalError("eigendecomposition failed in FID");
    }
    Eigen::VectorXd values = solver.eigenvalues();
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values(i) < -1e-8) {
            throw EvalError("covariance square root has a significantly negative eigenvalue");
        }
        values(i) = std::sqrt(std::max(0.0, values(i)));
    }
    return solver.eigenvectors() * values.asDiagonal() * solver.eigenvectors().transpose();
}
}  // namespace

double fid(const Mat& features_a, const Mat& features_b, double eps) {
    if (features_a.cols() != features_b.cols() || features_a.rows() < 2 || features_b.rows() < 2) {
        throw EvalError("fid needs two feature sets with matching dimensions and >= 2 rows");
    }
    const Eigen::RowVectorXd mu_a = features_a.colwise().mean();
    const Eigen::RowVectorXd mu_b = features_b.colwise().mean();
    const Mat cov_a = covariance(features_a, eps);
    const Mat cov_b = covariance(features_b, eps);

    // tr((S_A S_B)^{1/2}) via sqrt(S_A)^T S_B sqrt(S_A), which is symmetric PSD
    const Mat root_a = sqrtm_psd(cov_a);
    Mat inner = root_a * cov_b * root_a;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> solver(inner);
    if (solver.info() != Eigen::Success) {
        throw EvalError("eigendecomposition failed in FID");
    }
    double trace_sqrt = 0.0;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        const double v = solver.eigenvalues()(i);
        if (v < -1e-8) {
            throw EvalError("FID product matrix is not PSD");
        }
        trace_sqrt += std::sqrt(std::max(0.0, v));
    }
    const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() -
                         2.0 * trace_sqrt;
    if (!std::isfinite(value)) {
        throw EvalError("FID is not finite");
    }
    return std::max(0.0, value);
}

RPrecision r_precision(const Mat& queries, const Mat& gallery, int batch, int n_batches,
                       uint64_t seed) {
    if (queries.rows() != gallery.rows() || queries.cols() != gallery.cols()) {
        throw EvalError("r_precision needs aligned query/gallery pairs");
    }
    const Eigen::Index n = queries.rows();
    if (n < batch) {
        throw EvalError("r_precision needs at least one full batch of pairs");
    }
    Rng rng(seed);
    std::array<int64_t, 3> hits{0, 0, 0};
    int64_t total = 0;
    std::vector<Eigen::Index> pool(static_cast<size_t>(n));
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    for (int b = 0; b < n_batches; ++b) {
        rng.shuffle(pool);
        for (int q = 0; q < batch; ++q) {
            const Eigen::Index query_idx = pool[static_cast<size_t>(q)];
            const double true_dist = (queries.row(query_idx) - gallery.row(query_idx)).norm();
            int rank = 0;
            for (int g = 0; g < batch; ++g) {
                const Eigen::Index gal_idx = pool[static_cast<size_t>(g)];
                if (gal_idx == query_idx) continue;
                if ((queries.row(query_idx) - gallery.row(gal_idx)).norm() < true_dist) {
                    ++rank;
                }
            }
            for (int top = 0; top < 3; ++top) {
                if (rank <= top) hits[static_cast<size_t>(top)]++;
            }
            ++total;
        }
    }
    return RPrecision{static_cast<double>(hits[0]) / total, static_cast<double>(hits[1]) / total,
                      static_cast<double>(hits[2]) / total};
}

double matching_score(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw EvalError("matching_score needs aligned pairs");
    }
    if (a.rows() == 0) {
        throw EvalError("matching_score of empty sets");
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        acc += (a.row(i) - b.row(i)).norm();
    }
    return acc / static_cast<double>(a.rows());
}

double diversity(const Mat& embeddings, int pairs, uint64_t seed) {
    if (embeddings.rows() < 2) {
        throw EvalError("diversity needs at least two motions");
    }
    Rng rng(seed);
    double acc = 0.0;
    for (int p = 0; p < pairs; ++p) {
        const Eigen::Index i =
            static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(embeddings.rows())));
        Eigen::Index j = i;
        while (j == i) {
            j = static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(embeddings.rows())));
        }
        acc += (embeddings.row(i) - embeddings.row(j)).norm();
    }
    return acc / static_cast<double>(pairs);
}

std::pair<double, double> lve_fve(const data::MotionSequence& gt, const data::MotionSequence& pred,
                                  const VertexModel& vm) {
    if (gt.length() != pred.length()) {
        throw EvalError("lve_fve needs equal frame counts");
    }
    const Mat gt_vertices = vm.decode_sequence(gt);
    const Mat pred_vertices = vm.decode_sequence(pred);
    double lve_acc = 0.0;
    double fve_acc = 0.0;
    for (Eigen::Index t = 0; t < gt.length(); ++t) {
        double frame_max = 0.0;
        for (const int v : vm.lip_indices()) {
            const double dx = gt_vertices(t, v * 3) - pred_vertices(t, v * 3);
            const double dy = gt_vertices(t, v * 3 + 1) - pred_vertices(t, v * 3 + 1);
            const double dz = gt_vertices(t, v * 3 + 2) - pred_vertices(t, v * 3 + 2);
            frame_max = std::max(frame_max, std::sqrt(dx * dx + dy * dy + dz * dz));
        }
        lve_acc += frame_max;
        double frame_mean = 0.0;
        for (const int v : vm.face_indices()) {
            const double dx = gt_vertices(t, v * 3) - pred_vertices(t, v * 3);
            const double dy = gt_vertices(t, v * 3 + 1) - pred_vertices(t, v * 3 + 1);
            const double dz = gt_vertices(t, v * 3 + 2) - pred_vertices(t, v * 3 + 2);
            frame_mean += std::sqrt(dx * dx + dy * dy + dz * dz);
        }
        fve_acc += frame_mean / static_cast<double>(vm.face_indices().size());
    }
    const double frames = static_cast<double>(gt.length());
    return {lve_acc / frames, fve_acc / frames};
}

}  // namespace facemotion::eval
