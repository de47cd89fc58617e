#include "facemotion/eval/vertex_model.hpp"

#include <fstream>
#include <set>

namespace facemotion::eval {

using nn::Mat;

VertexModel::VertexModel(Mat template_vertices, Mat basis, std::vector<int> lip_indices,
                         std::vector<int> face_indices)
    : template_(std::move(template_vertices)),
      basis_(std::move(basis)),
      lip_(std::move(lip_indices)),
      face_(std::move(face_indices)) {
    validate();
}

void VertexModel::validate() const {
    if (template_.cols() != 3 || basis_.rows() != data::kParamDim ||
        basis_.cols() != template_.rows() * 3) {
        throw EvalError("vertex model shapes are inconsistent");
    }
    std::set<int> lips(lip_.begin(), lip_.end());
    for (const int f : face_) {
        if (lips.count(f)) {
            throw EvalError("lip and face index sets must be disjoint");
        }
    }
    for (const int idx : lip_) {
        if (idx < 0 || idx >= template_.rows()) throw EvalError("lip index out of range");
    }
    for (const int idx : face_) {
        if (idx < 0 || idx >= template_.rows()) throw EvalError("face index out of range");
    }
    if (lip_.empty() || face_.empty()) {
        throw EvalError("lip and face index sets must be non-empty");
    }
}

VertexModel VertexModel::default_asset(uint64_t seed) {
    constexpr int kVertices = 1000;
    constexpr int kLips = 20;
    constexpr int kFace = 400;
    Rng rng(seed);

    Mat tmpl(kVertices, 3);
    for (Eigen::Index i = 0; i < tmpl.size(); ++i) {
        tmpl(i) = 50.0 * rng.normal();  // head-sized blob, mm
    }

    // orthonormalized dense rows scaled to mm displacement per parameter unit
    Mat basis(data::kParamDim, kVertices * 3);
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
        for (Eigen::Index c = 0; c < basis.cols(); ++c) {
            basis(r, c) = rng.normal();
        }
    }
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
        for (Eigen::Index p = 0; p < r; ++p) {
            basis.row(r) -= basis.row(r).dot(basis.row(p)) * basis.row(p);
        }
        basis.row(r) /= basis.row(r).norm();
    }
    basis *= 10.0;  // ~10 mm of motion per unit parameter

    std::vector<int> order(kVertices);
    for (int i = 0; i < kVertices; ++i) order[static_cast<size_t>(i)] = i;
    rng.shuffle(order);
    std::vector<int> lips(order.begin(), order.begin() + kLips);
    std::vector<int> face(order.begin() + kLips, order.begin() + kLips + kFace);
    return VertexModel(std::move(tmpl), std::move(basis), std::move(lips), std::move(face));
}

Mat VertexModel::decode_frame(const Eigen::RowVectorXd& params) const {
    if (params.size() != data::kParamDim) {
        throw EvalError("decode_frame expects 56 parameters");
    }
    const Eigen::RowVectorXd flat = params * basis_;
    Mat out = template_;
    for (Eigen::Index v = 0; v < template_.rows(); ++v) {
        out(v, 0) += flat(v * 3);
        out(v, 1) += flat(v * 3 + 1);
        out(v, 2) += flat(v * 3 + 2);
    }
    return out;
}

Mat VertexModel::decode_sequence(const data::MotionSequence& seq) const {
    Mat flat = seq.frames.cast<double>() * basis_;  // T x V*3
    for (Eigen::Index v = 0; v < template_.rows(); ++v) {
        flat.col(v * 3).array() += template_(v, 0);
        flat.col(v * 3 + 1).array() += template_(v, 1);
        flat.col(v * 3 + 2).array() += template_(v, 2);
    }
    return flat;
}

Mat VertexModel::face_region_features(const data::MotionSequence& seq, bool include_pose) const {
    const Mat flat = seq.frames.cast<double>() * basis_;  // offsets only; template cancels
    const Eigen::Index cols =
        static_cast<Eigen::Index>(face_.size()) * 3 + (include_pose ? 3 : 0);
    Mat out(seq.length(), cols);
    for (size_t i = 0; i < face_.size(); ++i) {
        const int v = face_[i];
        out.col(static_cast<Eigen::Index>(i) * 3) = flat.col(v * 3);
        out.col(static_cast<Eigen::Index>(i) * 3 + 1) = flat.col(v * 3 + 1);
        out.col(static_cast<Eigen::Index>(i) * 3 + 2) = flat.col(v * 3 + 2);
    }
    if (include_pose) {
        const Eigen::Index base = static_cast<Eigen::Index>(face_.size()) * 3;
        for (int k = 0; k < 3; ++k) {
            // neck triple scaled into the same magnitude range as the vertices
            out.col(base + k) = 10.0 * seq.frames.col(data::kNeckStart + k).cast<double>();
        }
    }
    return out;
}

namespace {
void put_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
uint32_t get_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

void write_f32_block(std::ofstream& out, const Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const float f = static_cast<float>(m(r, c));
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
}

Mat read_f32_block(std::ifstream& in, Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            float f = 0.0f;
            in.read(reinterpret_cast<char*>(&f), 4);
            m(r, c) = f;
        }
    }
    if (!in) {
        throw IntegrityError("vertex model asset truncated");
    }
    return m;
}
}  // namespace

void VertexModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ContainerFormatError("cannot write vertex model: " + path.string());
    }
    out.write("FMVM", 4);
    put_u32(out, 1);  // version
    put_u32(out, static_cast<uint32_t>(template_.rows()));
    put_u32(out, static_cast<uint32_t>(lip_.size()));
    put_u32(out, static_cast<uint32_t>(face_.size()));
    write_f32_block(out, template_);
    write_f32_block(out, basis_);
    for (const int idx : lip_) put_u32(out, static_cast<uint32_t>(idx));
    for (const int idx : face_) put_u32(out, static_cast<uint32_t>(idx));
}

VertexModel VertexModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ContainerFormatError("cannot read vertex model: " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "FMVM") {
        throw ContainerFormatError("not a vertex model asset: " + path.string());
    }
    const uint32_t version = get_u32(in);
    if (version != 1) {
        throw ContainerFormatError("unsupported vertex model version");
    }
    const uint32_t v = get_u32(in);
    const uint32_t n_lips = get_u32(in);
    const uint32_t n_face = get_u32(in);
    if (!in || v == 0 || v > (1u << 20)) {
        throw IntegrityError("vertex model header malformed");
    }
    Mat tmpl = read_f32_block(in, v, 3);
    Mat basis = read_f32_block(in, data::kParamDim, static_cast<Eigen::Index>(v) * 3);
    std::vector<int> lips(n_lips), face(n_face);
    for (auto& idx : lips) idx = static_cast<int>(get_u32(in));
    for (auto& idx : face) idx = static_cast<int>(get_u32(in));
    if (!in) {
        throw IntegrityError("vertex model asset truncated");
    }
    return VertexModel(std::move(tmpl), std::move(basis), std::move(lips), std::move(face));
}

}  // namespace facemotion::eval
