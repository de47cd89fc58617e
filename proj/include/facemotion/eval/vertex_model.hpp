#pragma once

#include <filesystem>
#include <vector>

#include "facemotion/data/motion.hpp"
#include "facemotion/nn/tensor.hpp"

namespace facemotion::eval {

// Fixed linear map from the 56 motion parameters to V x 3 vertices, standing
// in for a mesh decode. Lip and face index sets are disjoint; units are mm.
class VertexModel {
public:
    VertexModel() = default;
    VertexModel(nn::Mat template_vertices, nn::Mat basis, std::vector<int> lip_indices,
                std::vector<int> face_indices);

    // Versioned deterministic asset: V = 1000 vertices, 56 orthonormal-ish
    // dense basis rows scaled to mm magnitudes, 20 lip and 400 face vertices.
    static VertexModel default_asset(uint64_t seed = 2024);

    int vertex_count() const { return static_cast<int>(template_.rows()); }
    const nn::Mat& basis() const { return basis_; }  // 56 x (V*3)
    const nn::Mat& template_vertices() const { return template_; }
    const std::vector<int>& lip_indices() const { return lip_; }
    const std::vector<int>& face_indices() const { return face_; }

    // V x 3 positions for one 56-dim parameter frame.
    nn::Mat decode_frame(const Eigen::RowVectorXd& params) const;
    // T x (V*3) flattened positions for a whole sequence.
    nn::Mat decode_sequence(const data::MotionSequence& seq) const;
    // T x (|face|*3 [+3 neck]) features for the retrieval motion tower.
    nn::Mat face_region_features(const data::MotionSequence& seq, bool include_pose) const;

    void save(const std::filesystem::path& path) const;
    static VertexModel load(const std::filesystem::path& path);

private:
    nn::Mat template_;  // V x 3
    nn::Mat basis_;     // 56 x (V*3)
    std::vector<int> lip_;
    std::vector<int> face_;

    void validate() const;
};

}  // namespace facemotion::eval
