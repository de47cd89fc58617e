#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "facemotion/nn/layers.hpp"
#include "facemotion/nn/optim.hpp"
#include "facemotion/nn/serialize.hpp"
#include "test_support.hpp"

#include <sstream>

using namespace facemotion;
using namespace facemotion::nn;
using fmtest::max_rel_error;
using fmtest::numeric_gradient;

namespace {
Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = scale * rng.normal();
        }
    }
    return m;
}
}  // namespace

TEST_CASE("matmul/add/relu chain gradient matches finite differences") {
    Rng rng(11);
    const Mat x0 = random_mat(rng, 5, 4);
    const Mat w0 = random_mat(rng, 4, 3);
    const Mat b0 = random_mat(rng, 1, 3);
    const Mat target = random_mat(rng, 5, 3);

    auto loss_value = [&](const Mat& x, const Mat& w, const Mat& b) {
        Tensor t = mse(relu(add_rowvec(matmul(Tensor::constant(x), Tensor::constant(w)),
                                       Tensor::constant(b))),
                       Tensor::constant(target));
        return t.scalar();
    };

    Tensor x = Tensor::leaf(x0);
    Tensor w = Tensor::leaf(w0);
    Tensor b = Tensor::leaf(b0);
    Tensor loss = mse(relu(add_rowvec(matmul(x, w), b)), Tensor::constant(target));
    loss.backward();

    const Mat gx = numeric_gradient([&](const Mat& m) { return loss_value(m, w0, b0); }, x0);
    const Mat gw = numeric_gradient([&](const Mat& m) { return loss_value(x0, m, b0); }, w0);
    const Mat gb = numeric_gradient([&](const Mat& m) { return loss_value(x0, w0, m); }, b0);
    CHECK(max_rel_error(x.grad(), gx) < 1e-6);
    CHECK(max_rel_error(w.grad(), gw) < 1e-6);
    CHECK(max_rel_error(b.grad(), gb) < 1e-6);
}

TEST_CASE("layer_norm gradient matches finite differences") {
    Rng rng(12);
    const Mat x0 = random_mat(rng, 6, 8);
    const Mat g0 = random_mat(rng, 1, 8, 0.5).array() + 1.0;
    const Mat b0 = random_mat(rng, 1, 8, 0.2);
    const Mat target = random_mat(rng, 6, 8);

    auto value = [&](const Mat& x, const Mat& g, const Mat& b) {
        return mse(layer_norm(Tensor::constant(x), Tensor::constant(g), Tensor::constant(b)),
                   Tensor::constant(target))
            .scalar();
    };

    Tensor x = Tensor::leaf(x0);
    Tensor g = Tensor::leaf(g0);
    Tensor b = Tensor::leaf(b0);
    mse(layer_norm(x, g, b), Tensor::constant(target)).backward();

    CHECK(max_rel_error(x.grad(), numeric_gradient([&](const Mat& m) { return value(m, g0, b0); },
                                                   x0)) < 1e-5);
    CHECK(max_rel_error(g.grad(), numeric_gradient([&](const Mat& m) { return value(x0, m, b0); },
                                                   g0)) < 1e-5);
    CHECK(max_rel_error(b.grad(), numeric_gradient([&](const Mat& m) { return value(x0, g0, m); },
                                                   b0)) < 1e-5);
}

TEST_CASE("masked softmax rows sum to one over unmasked keys and gradients check out") {
    Rng rng(13);
    const Mat x0 = random_mat(rng, 4, 6);
    Mat mask = Mat::Ones(4, 6);
    mask(0, 3) = 0.0;
    mask(2, 0) = 0.0;
    mask(2, 1) = 0.0;

    Tensor x = Tensor::leaf(x0);
    Tensor p = masked_softmax_rows(x, mask);
    for (Eigen::Index r = 0; r < 4; ++r) {
        CHECK(p.value().row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(p.value()(0, 3) < 1e-12);
    CHECK(p.value()(2, 0) < 1e-12);

    const Mat weights = random_mat(rng, 4, 6);
    hadamard(p, Tensor::constant(weights));
    Tensor loss = mean_all(hadamard(masked_softmax_rows(x, mask), Tensor::constant(weights)));
    loss.backward();
    const Mat gx = numeric_gradient(
        [&](const Mat& m) {
            return mean_all(hadamard(masked_softmax_rows(Tensor::constant(m), mask),
                                     Tensor::constant(weights)))
                .scalar();
        },
        x0);
    CHECK(max_rel_error(x.grad(), gx) < 1e-5);
}

TEST_CASE("masked softmax rejects fully masked rows") {
    Mat x = Mat::Zero(2, 3);
    Mat mask = Mat::Ones(2, 3);
    mask.row(1).setZero();
    CHECK_THROWS_AS(masked_softmax_rows(Tensor::constant(x), mask), ValidationError);
}

TEST_CASE("cross entropy equals -mean log softmax and gradient checks out") {
    Rng rng(14);
    const Mat logits0 = random_mat(rng, 5, 7);
    const std::vector<int> targets = {2, 0, 6, 6, 3};

    Tensor logits = Tensor::leaf(logits0);
    Tensor loss = cross_entropy_mean(logits, targets);

    double expected = 0.0;
    for (int r = 0; r < 5; ++r) {
        expected += logsumexp_row(logits0.row(r)) - logits0(r, targets[static_cast<size_t>(r)]);
    }
    expected /= 5.0;
    CHECK(loss.scalar() == doctest::Approx(expected).epsilon(1e-12));

    loss.backward();
    const Mat g = numeric_gradient(
        [&](const Mat& m) {
            return cross_entropy_mean(Tensor::constant(m), targets).scalar();
        },
        logits0);
    CHECK(max_rel_error(logits.grad(), g) < 1e-6);
}

TEST_CASE("cross entropy honors ignore_id") {
    Rng rng(15);
    const Mat logits0 = random_mat(rng, 4, 5);
    Tensor full = cross_entropy_mean(Tensor::constant(logits0), {1, 2, -1, 0}, -1);
    double expected = 0.0;
    for (const int r : {0, 1, 3}) {
        const int t = r == 0 ? 1 : (r == 1 ? 2 : 0);
        expected += logsumexp_row(logits0.row(r)) - logits0(r, t);
    }
    CHECK(full.scalar() == doctest::Approx(expected / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(cross_entropy_mean(Tensor::constant(logits0), {-1, -1, -1, -1}, -1),
                    ValidationError);
}

TEST_CASE("conv1d via im2col matches a direct convolution and its gradient") {
    Rng rng(16);
    const int t = 9, cin = 3, cout = 2, kernel = 3;
    const Mat x0 = random_mat(rng, t, cin);

    Conv1d conv("conv", cin, cout, kernel, 1, 1, 1, rng);

    GraphCtx ctx(true);
    Tensor x = Tensor::leaf(x0);
    Tensor y = conv.forward(ctx, x);
    REQUIRE(y.rows() == t);
    REQUIRE(y.cols() == cout);

    // direct zero-padded convolution
    for (int o = 0; o < t; ++o) {
        for (int co = 0; co < cout; ++co) {
            double acc = conv.bias.value(0, co);
            for (int k = 0; k < kernel; ++k) {
                const int src = o - 1 + k;
                if (src < 0 || src >= t) continue;
                for (int ci = 0; ci < cin; ++ci) {
                    acc += x0(src, ci) * conv.weight.value(k * cin + ci, co);
                }
            }
            CHECK(y.value()(o, co) == doctest::Approx(acc).epsilon(1e-12));
        }
    }

    mse(y, Tensor::constant(Mat::Zero(t, cout))).backward();
    ctx.accumulate_grads();
    const Mat gw = numeric_gradient(
        [&](const Mat& m) {
            Conv1d probe = conv;
            probe.weight.value = m;
            GraphCtx c2(false);
            return mse(probe.forward(c2, Tensor::constant(x0)),
                       Tensor::constant(Mat::Zero(t, cout)))
                .scalar();
        },
        conv.weight.value);
    CHECK(max_rel_error(conv.weight.grad, gw) < 1e-6);

    const Mat gx = numeric_gradient(
        [&](const Mat& m) {
            GraphCtx c2(false);
            return mse(conv.forward(c2, Tensor::constant(m)), Tensor::constant(Mat::Zero(t, cout)))
                .scalar();
        },
        x0);
    CHECK(max_rel_error(x.grad(), gx) < 1e-6);
}

TEST_CASE("strided conv, pooling, upsampling shapes and gradients") {
    Rng rng(17);
    const Mat x0 = random_mat(rng, 8, 4);

    SUBCASE("stride-2 conv halves the length") {
        Conv1d down("down", 4, 4, 4, 2, 1, 1, rng);
        GraphCtx ctx(false);
        Tensor y = down.forward(ctx, Tensor::constant(x0));
        CHECK(y.rows() == 4);
    }
    SUBCASE("pool_rows_mean handles partial tail groups") {
        Tensor y = pool_rows_mean(Tensor::constant(x0.topRows(7)), 4);
        CHECK(y.rows() == 2);
        CHECK(y.value()(1, 0) ==
              doctest::Approx((x0(4, 0) + x0(5, 0) + x0(6, 0)) / 3.0).epsilon(1e-12));

        Tensor x = Tensor::leaf(x0.topRows(7));
        mse(pool_rows_mean(x, 4), Tensor::constant(Mat::Zero(2, 4))).backward();
        const Mat g = numeric_gradient(
            [&](const Mat& m) {
                return mse(pool_rows_mean(Tensor::constant(m), 4),
                           Tensor::constant(Mat::Zero(2, 4)))
                    .scalar();
            },
            Mat(x0.topRows(7)));
        CHECK(max_rel_error(x.grad(), g) < 1e-6);
    }
    SUBCASE("upsample then slice gradient") {
        Tensor x = Tensor::leaf(x0);
        Tensor y = slice_rows(upsample_rows_nearest(x, 2), 3, 9);
        mse(y, Tensor::constant(Mat::Zero(9, 4))).backward();
        const Mat g = numeric_gradient(
            [&](const Mat& m) {
                return mse(slice_rows(upsample_rows_nearest(Tensor::constant(m), 2), 3, 9),
                           Tensor::constant(Mat::Zero(9, 4)))
                    .scalar();
            },
            x0);
        CHECK(max_rel_error(x.grad(), g) < 1e-6);
    }
}

TEST_CASE("multi-head attention gradient matches finite differences") {
    Rng rng(18);
    const int dim = 8, heads = 2;
    MultiHeadAttention attn("attn", dim, heads, rng);
    const Mat q0 = random_mat(rng, 5, dim, 0.7);
    const Mat kv0 = random_mat(rng, 6, dim, 0.7);
    Mat mask = Mat::Ones(5, 6);
    mask(1, 4) = 0;
    mask(3, 0) = 0;
    const Mat target = random_mat(rng, 5, dim);

    GraphCtx ctx(true);
    Tensor q = Tensor::leaf(q0);
    Tensor kv = Tensor::leaf(kv0);
    mse(attn.forward(ctx, q, kv, &mask), Tensor::constant(target)).backward();
    ctx.accumulate_grads();

    auto value = [&](const Mat& qm, const Mat& kvm) {
        GraphCtx c2(false);
        return mse(attn.forward(c2, Tensor::constant(qm), Tensor::constant(kvm), &mask),
                   Tensor::constant(target))
            .scalar();
    };
    CHECK(max_rel_error(q.grad(), numeric_gradient([&](const Mat& m) { return value(m, kv0); },
                                                   q0)) < 1e-5);
    CHECK(max_rel_error(kv.grad(), numeric_gradient([&](const Mat& m) { return value(q0, m); },
                                                    kv0)) < 1e-5);

    const Mat gw = numeric_gradient(
        [&](const Mat& m) {
            MultiHeadAttention probe = attn;
            probe.wv.weight.value = m;
            GraphCtx c2(false);
            return mse(probe.forward(c2, Tensor::constant(q0), Tensor::constant(kv0), &mask),
                       Tensor::constant(target))
                .scalar();
        },
        attn.wv.weight.value);
    CHECK(max_rel_error(attn.wv.weight.grad, gw) < 1e-5);
}

TEST_CASE("embedding and straight-through gradients") {
    Rng rng(19);
    EmbeddingTable emb("emb", 6, 4, rng);
    const std::vector<int> ids = {1, 3, 3, 0};

    GraphCtx ctx(true);
    Tensor out = emb.forward(ctx, ids);
    REQUIRE(out.rows() == 4);
    mse(out, Tensor::constant(Mat::Zero(4, 4))).backward();
    ctx.accumulate_grads();
    const Mat g = numeric_gradient(
        [&](const Mat& m) {
            EmbeddingTable probe = emb;
            probe.table.value = m;
            GraphCtx c2(false);
            return mse(probe.forward(c2, ids), Tensor::constant(Mat::Zero(4, 4))).scalar();
        },
        emb.table.value);
    CHECK(max_rel_error(emb.table.grad, g) < 1e-6);

    // straight-through: value of the quantized input, gradient to z
    const Mat z0 = random_mat(rng, 3, 4);
    const Mat q0 = random_mat(rng, 3, 4);
    Tensor z = Tensor::leaf(z0);
    Tensor st = straight_through(z, q0);
    CHECK((st.value() - q0).norm() == 0.0);
    mse(st, Tensor::constant(Mat::Zero(3, 4))).backward();
    const Mat expected = 2.0 / 12.0 * q0;
    CHECK(max_rel_error(z.grad(), expected) < 1e-12);
}

TEST_CASE("adam minimizes a convex quadratic") {
    Rng rng(20);
    Param p;
    p.name = "p";
    p.value = random_mat(rng, 3, 3);
    p.reset_state();
    const Mat target = random_mat(rng, 3, 3);
    Adam opt({.lr = 0.05, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8});
    ParamList params{&p};
    for (int i = 0; i < 400; ++i) {
        opt.zero_grad(params);
        GraphCtx ctx(true);
        Tensor loss = mse(ctx.use(p), Tensor::constant(target));
        loss.backward();
        ctx.accumulate_grads();
        opt.step(params);
    }
    CHECK((p.value - target).norm() < 1e-3);
}

TEST_CASE("parameter serialization round trips") {
    Rng rng(21);
    Linear layer("lin", 5, 3, rng);
    ParamList params;
    layer.collect(params);

    std::stringstream buffer;
    write_params(buffer, params);

    Linear other("lin", 5, 3, rng);  // different init
    ParamList other_params;
    other.collect(other_params);
    read_params(buffer, other_params);
    CHECK((other.weight.value - layer.weight.value).norm() == 0.0);
    CHECK((other.bias.value - layer.bias.value).norm() == 0.0);

    std::stringstream truncated(buffer.str().substr(0, 20));
    Linear third("lin", 5, 3, rng);
    ParamList third_params;
    third.collect(third_params);
    CHECK_THROWS_AS(read_params(truncated, third_params), IntegrityError);
}

TEST_CASE("graph reuse of one parameter accumulates both paths") {
    Rng rng(22);
    Param p;
    p.name = "w";
    p.value = random_mat(rng, 2, 2);
    p.reset_state();

    GraphCtx ctx(true);
    Tensor w = ctx.use(p);
    Tensor w2 = ctx.use(p);
    CHECK(w.node().get() == w2.node().get());  // bound once
    Tensor loss = sum_all(matmul(w, w));       // quadratic use
    loss.backward();
    ctx.accumulate_grads();

    const Mat g = numeric_gradient(
        [&](const Mat& m) {
            return sum_all(matmul(Tensor::constant(m), Tensor::constant(m))).scalar();
        },
        p.value);
    CHECK(max_rel_error(p.grad, g) < 1e-6);
}
