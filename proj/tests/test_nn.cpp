#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "s2sr/nn/adam.hpp"
#include "s2sr/nn/checkpoint.hpp"
#include "s2sr/nn/model.hpp"
#include "s2sr/nn/ops.hpp"
#include "s2sr/train.hpp"
#include "nn_util.hpp"
#include "test_util.hpp"

using namespace s2sr;
using namespace s2sr::nn;
using namespace test;

namespace {

double naive_conv_at(const Node<double>& x, const Node<double>& w, const Node<double>& b, int n, int o, int y, int xx) {
    double acc = b.value[static_cast<std::size_t>(o)];
    const Shape& s = x.shape;
    for (int c = 0; c < s.c; ++c)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                const int sy = y + ky - 1;
                const int sx = xx + kx - 1;
                if (sy < 0 || sy >= s.h || sx < 0 || sx >= s.w) continue;
                acc += w.value[((static_cast<std::size_t>(o) * s.c + c) * 3 + ky) * 3 + kx] *
                       x.value[((static_cast<std::size_t>(n) * s.c + c) * s.h + sy) * s.w + sx];
            }
    return acc;
}

}  // namespace

TEST(Conv2d, IdentityAndBias) {
    Rng rng(1);
    auto x = random_leaf<double>({1, 2, 5, 5}, rng);
    std::vector<double> w(2 * 2 * 9, 0.0);
    w[(0 * 2 + 0) * 9 + 4] = 1.0;
    w[(1 * 2 + 1) * 9 + 4] = 1.0;
    auto y = conv2d(x, make_leaf<double>({2, 2, 3, 3}, w), zeros<double>({2, 1, 1, 1}));
    EXPECT_EQ(y->value, x->value);
    auto c = conv2d(x, zeros<double>({3, 2, 3, 3}), make_leaf<double>({3, 1, 1, 1}, {1.5, 1.5, 1.5}));
    for (double v : c->value) EXPECT_EQ(v, 1.5);
}

TEST(Conv2d, MatchesNaiveLoops) {
    Rng rng(2);
    for (const Shape s : {Shape{1, 2, 5, 5}, Shape{2, 3, 4, 7}}) {
        auto x = random_leaf<double>(s, rng);
        auto w = random_leaf<double>({3, s.c, 3, 3}, rng);
        auto b = random_leaf<double>({3, 1, 1, 1}, rng);
        auto y = conv2d(x, w, b);
        ASSERT_EQ(y->shape, (Shape{s.n, 3, s.h, s.w}));
        for (int n = 0; n < s.n; ++n)
            for (int o = 0; o < 3; ++o)
                for (int r = 0; r < s.h; ++r)
                    for (int c = 0; c < s.w; ++c)
                        EXPECT_NEAR(y->value[((static_cast<std::size_t>(n) * 3 + o) * s.h + r) * s.w + c], naive_conv_at(*x, *w, *b, n, o, r, c), 1e-12);
    }
    // Float path against the same oracle.
    auto xd = random_leaf<double>({1, 2, 5, 5}, rng);
    auto wd = random_leaf<double>({3, 2, 3, 3}, rng);
    auto bd = random_leaf<double>({3, 1, 1, 1}, rng);
    auto to_f = [](const Var<double>& v) { return make_leaf<float>(v->shape, std::vector<float>(v->value.begin(), v->value.end())); };
    auto yf = conv2d(to_f(xd), to_f(wd), to_f(bd));
    for (int o = 0; o < 3; ++o)
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 5; ++c) EXPECT_NEAR(yf->value[(o * 5 + r) * 5 + c], naive_conv_at(*xd, *wd, *bd, 0, o, r, c), 1e-5);
}

TEST(Conv2d, ShapeErrors) {
    Rng rng(3);
    auto x = random_leaf<double>({1, 2, 4, 4}, rng);
    EXPECT_THROW(conv2d(x, random_leaf<double>({3, 1, 3, 3}, rng), random_leaf<double>({3, 1, 1, 1}, rng)), DataError);
    EXPECT_THROW(conv2d(x, random_leaf<double>({3, 2, 3, 3}, rng), random_leaf<double>({2, 1, 1, 1}, rng)), DataError);
}

TEST(Gradcheck, Conv2d) {
    Rng rng(4);
    auto x = random_leaf<double>({2, 3, 5, 6}, rng);
    auto w = random_leaf<double>({4, 3, 3, 3}, rng);
    auto b = random_leaf<double>({4, 1, 1, 1}, rng);
    EXPECT_LT(gradcheck([&] { return dot_probe(conv2d(x, w, b), 9); }, {x, w, b}, 20, 1), 1e-5);
}

TEST(LeakyRelu, ValuesAndGradient) {
    auto x = make_leaf<double>({1, 1, 1, 4}, {-1.0, -3.0, 3.0, 0.5}, true);
    auto y = leaky_relu(x, 0.2);
    EXPECT_DOUBLE_EQ(y->value[0], -0.2);
    EXPECT_DOUBLE_EQ(y->value[3], 0.5);
    // d/dx of sum(leaky(x)) via l1 against a far-below target.
    auto target = make_leaf<double>({1, 1, 1, 4}, std::vector<double>(4, -100.0));
    backward(l1_loss(leaky_relu(x, 0.2), target));
    EXPECT_NEAR(x->grad[1] * 4.0, 0.2, 1e-12);
    EXPECT_NEAR(x->grad[2] * 4.0, 1.0, 1e-12);
    auto xr = make_leaf<double>({1, 1, 3, 3}, {-3, -2, -1, -0.5, 0.3, 1, 2, 3, 4}, true);
    EXPECT_LT(gradcheck([&] { return dot_probe(leaky_relu(xr, 0.2), 2); }, {xr}, 20, 2), 1e-5);
}

TEST(Gradcheck, ElementwiseAndStructuralOps) {
    Rng rng(5);
    auto a = random_leaf<double>({2, 2, 3, 4}, rng);
    auto b = random_leaf<double>({2, 2, 3, 4}, rng);
    auto c = random_leaf<double>({2, 1, 3, 4}, rng);
    EXPECT_LT(gradcheck([&] { return dot_probe(add(a, scale(b, 0.3)), 1); }, {a, b}, 20, 3), 1e-5);
    EXPECT_LT(gradcheck([&] { return dot_probe(concat<double>({a, c, b}), 2); }, {a, b, c}, 20, 4), 1e-5);
    EXPECT_LT(gradcheck([&] { return dot_probe(upsample_nearest2(a), 3); }, {a}, 20, 5), 1e-5);
    EXPECT_LT(gradcheck([&] { return dot_probe(bicubic_up2(a), 4); }, {a}, 20, 6), 1e-5);
    // Fan-out: a used twice.
    EXPECT_LT(gradcheck([&] { return dot_probe(add(a, leaky_relu(a, 0.2)), 5); }, {a}, 20, 7), 1e-5);
}

TEST(L1Loss, ValuesAndGradient) {
    Rng rng(6);
    auto t = random_leaf<double>({1, 2, 3, 3}, rng, 1.0, false);
    auto same = make_leaf<double>(t->shape, t->value, true);
    EXPECT_EQ(l1_loss(same, t)->value[0], 0.0);
    std::vector<double> plus2 = t->value;
    for (auto& v : plus2) v += 2.0;
    EXPECT_NEAR(l1_loss(make_leaf<double>(t->shape, plus2), t)->value[0], 2.0, 1e-12);

    auto p = random_leaf<double>(t->shape, rng);
    backward(l1_loss(p, t));
    for (std::size_t i = 0; i < p->numel(); ++i) {
        const double s = p->value[i] > t->value[i] ? 1.0 : -1.0;
        EXPECT_DOUBLE_EQ(p->grad[i], s / 18.0);
    }
    EXPECT_LT(gradcheck([&] { return l1_loss(p, t); }, {p}, 20, 8), 1e-5);
    EXPECT_THROW(l1_loss(p, random_leaf<double>({1, 2, 3, 4}, rng)), DataError);
}

TEST(L1Loss, BatchLossIsMeanOfSampleLosses) {
    Rng rng(7);
    auto p = random_leaf<float>({4, 3, 6, 6}, rng, 1.0, false);
    auto t = random_leaf<float>({4, 3, 6, 6}, rng, 1.0, false);
    const double whole = l1_loss(p, t)->value[0];
    double mean = 0.0;
    const std::size_t len = 3 * 36;
    for (int n = 0; n < 4; ++n) {
        auto pn = make_leaf<float>({1, 3, 6, 6}, std::vector<float>(p->value.begin() + n * len, p->value.begin() + (n + 1) * len));
        auto tn = make_leaf<float>({1, 3, 6, 6}, std::vector<float>(t->value.begin() + n * len, t->value.begin() + (n + 1) * len));
        mean += l1_loss(pn, tn)->value[0] / 4.0;
    }
    EXPECT_NEAR(whole, mean, 1e-6);
}

TEST(Upsample, NearestBlocksAndConstant) {
    auto x = make_leaf<double>({1, 1, 2, 2}, {1, 2, 3, 4});
    const auto y = upsample_nearest2(x);
    const std::vector<double> expect{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    EXPECT_EQ(y->value, expect);

    Rng rng(8);
    auto p = make_params<double>(ModelSpec{1, 2, 0, 1, 0.2}, rng, Init::Zero);
    // identity-like "up" convolution: centre tap on the diagonal
    auto& w = p.get("up.weight")->value;
    for (int c = 0; c < 2; ++c) w[(static_cast<std::size_t>(c) * 2 + c) * 9 + 4] = 1.0;
    auto u = upsample_x2(make_leaf<double>({1, 2, 3, 3}, std::vector<double>(18, 7.0)), p);
    ASSERT_EQ(u->shape, (Shape{1, 2, 6, 6}));
    for (double v : u->value) EXPECT_DOUBLE_EQ(v, 7.0);
}

TEST(Bicubic, ConstantRampAndAdjoint) {
    auto c = bicubic_up2(make_leaf<double>({1, 1, 4, 5}, std::vector<double>(20, 3.0)));
    for (double v : c->value) EXPECT_NEAR(v, 3.0, 1e-12);

    // Keys cubic reproduces linear functions away from the clamped edge.
    std::vector<double> ramp(8 * 8);
    for (int r = 0; r < 8; ++r)
        for (int col = 0; col < 8; ++col) ramp[r * 8 + col] = 2.0 * r + 0.5 * col;
    auto up = bicubic_up2(make_leaf<double>({1, 1, 8, 8}, ramp));
    for (int y = 4; y < 12; ++y)
        for (int x = 4; x < 12; ++x) {
            const double sy = (y - 0.5) / 2.0;  // pixel-centre alignment
            const double sx = (x - 0.5) / 2.0;
            EXPECT_NEAR(up->value[y * 16 + x], 2.0 * sy + 0.5 * sx, 1e-12);
        }

    // <A x, g> == <x, A^T g>
    Rng rng(9);
    auto x = random_leaf<double>({1, 1, 5, 6}, rng);
    auto ax = bicubic_up2(x);
    std::vector<double> g(ax->numel());
    for (auto& v : g) v = rng.normal();
    double lhs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) lhs += ax->value[i] * g[i];
    std::vector<double> atg(x->numel(), 0.0);
    nn::detail::bicubic2_plane_adjoint(g.data(), 5, 6, atg.data());
    double rhs = 0.0;
    for (std::size_t i = 0; i < atg.size(); ++i) rhs += x->value[i] * atg[i];
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Rrdb, ZeroAndBetaZeroAreIdentity) {
    Rng rng(10);
    const ModelSpec spec{3, 4, 1, 2, 0.2};
    auto x = random_leaf<double>({1, 4, 5, 5}, rng, 1.0, false);
    auto zero = make_params<double>(spec, rng, Init::Zero);
    EXPECT_EQ(rrdb_forward(x, zero, 0, 0.2)->value, x->value);
    auto rnd = random_model(spec, 11);
    EXPECT_EQ(rrdb_forward(x, rnd, 0, 0.0)->value, x->value);
    EXPECT_THROW(rrdb_forward(random_leaf<double>({1, 3, 5, 5}, rng), rnd, 0, 0.2), DataError);
}

TEST(Gradcheck, RrdbBlock64) {
    const ModelSpec spec{3, 4, 1, 2, 0.2};
    auto p = random_model(spec, 12);
    for (auto& [name, t] : p.tensors)
        for (auto& v : t->value) v *= 5.0;  // undo the 0.1 scaling so every path matters
    Rng rng(13);
    auto x = random_leaf<double>({1, 4, 5, 5}, rng);
    std::vector<Var<double>> inputs{x};
    for (const auto& [name, t] : p.tensors)
        if (name.rfind("rrdb0.rdb1", 0) == 0 || name == "rrdb0.rdb0.conv0.weight") inputs.push_back(t);
    EXPECT_LT(gradcheck([&] { return dot_probe(rrdb_forward(x, p, 0, 0.2), 3); }, inputs, 20, 9), 1e-5);
}

TEST(Gradcheck, RrdbBlock32) {
    const ModelSpec spec{3, 4, 1, 2, 0.2};
    auto pd = random_model(spec, 12);
    auto p = pd.cast<float>();
    Rng rng(13);
    auto x = random_leaf<float>({1, 4, 5, 5}, rng);
    std::vector<float> w(x->numel());
    for (auto& v : w) v = static_cast<float>(rng.normal());
    auto loss = [&] {
        const auto y = rrdb_forward(x, p, 0, 0.2F);
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) acc += double(y->value[i]) * w[i];
        return acc;
    };
    // Analytic gradient through the float graph.
    auto y = rrdb_forward(x, p, 0, 0.2F);
    auto probe = make_result<float>(Shape{}, "dot", {y}, [w](Node<float>& self) {
        for (std::size_t i = 0; i < w.size(); ++i) self.parents[0]->grad[i] += self.grad[0] * w[i];
    });
    backward(probe);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const std::size_t i = rng.below(x->numel());
        const float orig = x->value[i];
        const float h = 1e-2F;
        x->value[i] = orig + h;
        const double up = loss();
        x->value[i] = orig - h;
        const double dn = loss();
        x->value[i] = orig;
        const double num = (up - dn) / (2.0 * h);
        worst = std::max(worst, std::abs(num - x->grad[i]) / std::max(1e-3, std::abs(num) + std::abs(double(x->grad[i]))));
    }
    EXPECT_LT(worst, 1e-2);
}

TEST(Model, ZeroInitEqualsBicubic) {
    Rng rng(14);
    auto p = make_params<float>(ModelSpec::tiny(), rng);  // tail1 starts at zero
    auto x = random_leaf<float>({2, 3, 16, 16}, rng, 0.3, false);
    const auto y = model_forward(x, p);
    EXPECT_EQ(y->shape, (Shape{2, 3, 32, 32}));
    EXPECT_EQ(y->value, bicubic_up2(x)->value);
    auto z = make_params<float>(ModelSpec::tiny(), rng, Init::Zero);
    EXPECT_EQ(model_forward(x, z)->value, bicubic_up2(x)->value);
    EXPECT_THROW(model_forward(random_leaf<float>({1, 1, 8, 8}, rng), p), DataError);
}

TEST(Gradcheck, EndToEndModel64) {
    auto p = random_model(ModelSpec::tiny(), 15);
    Rng rng(16);
    auto x = random_leaf<double>({1, 3, 8, 8}, rng, 0.5);
    std::vector<Var<double>> inputs{x};
    for (const char* n : {"head.weight", "rrdb1.rdb2.conv4.weight", "trunk.bias", "up.weight", "tail0.weight", "tail1.weight", "tail1.bias"})
        inputs.push_back(p.get(n));
    EXPECT_LT(gradcheck([&] { return dot_probe(model_forward(x, p), 4); }, inputs, 20, 10), 1e-5);
}

TEST(Model, TranslationCompatible) {
    auto pd = random_model(ModelSpec::tiny(), 17);
    auto p = pd.cast<float>(false);
    const int n = 80;
    Rng rng(18);
    std::vector<float> base(3 * (n + 1) * (n + 1));
    for (auto& v : base) v = static_cast<float>(0.5 + 0.1 * rng.normal());
    auto crop = [&](int r0, int c0) {
        std::vector<float> v;
        for (int b = 0; b < 3; ++b)
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) v.push_back(base[(static_cast<std::size_t>(b) * (n + 1) + r + r0) * (n + 1) + c + c0]);
        return make_leaf<float>({1, 3, n, n}, v);
    };
    const auto a = model_forward(crop(1, 1), p);  // a(y) = f(y + 2)
    const auto b = model_forward(crop(0, 0), p);
    // Receptive field is 34 LR pixels; stay clear of the zero padding.
    const int lo = 2 * 36;
    const int hi = 2 * (n - 36);
    const int hw = 2 * n;
    double worst = 0.0;
    for (int ch = 0; ch < 3; ++ch)
        for (int y = lo; y < hi; ++y)
            for (int x = lo; x < hi; ++x)
                worst = std::max(worst, std::abs(double(a->value[(static_cast<std::size_t>(ch) * hw + y) * hw + x]) -
                                                 b->value[(static_cast<std::size_t>(ch) * hw + y + 2) * hw + x + 2]));
    EXPECT_LT(worst, 1e-3);
}

TEST(ModelSpec, ParameterCount) {
    for (const auto& s : {ModelSpec::tiny(), ModelSpec::desk(), ModelSpec::paper(1), ModelSpec{3, 4, 1, 2, 0.2}}) {
        Rng rng(1);
        const auto p = make_params<float>(s, rng);
        EXPECT_EQ(p.count(), parameter_count(s));
        std::size_t by_layout = 0;
        for (const auto& d : conv_layout(s)) by_layout += 9U * d.in_channels * d.out_channels + d.out_channels;
        EXPECT_EQ(by_layout, parameter_count(s));
    }
    EXPECT_EQ(parameter_count(ModelSpec::tiny()), 97987U);
    EXPECT_THROW(spec_by_name("huge"), UsageError);
}

TEST(Adam, ZeroGradAndFirstStepMagnitude) {
    Rng rng(19);
    auto p = make_params<float>(ModelSpec{3, 4, 1, 2, 0.2}, rng);
    AdamState<float> st(p);
    AdamConfig cfg;
    cfg.lr = 1e-3;
    const auto before = p.cast<float>();
    p.zero_grad();
    adam_step(p, st, cfg);
    EXPECT_EQ(st.step, 1);
    for (std::size_t k = 0; k < p.tensors.size(); ++k) EXPECT_EQ(p.tensors[k].second->value, before.tensors[k].second->value);

    AdamState<float> fresh(p);
    for (auto& [name, t] : p.tensors)
        for (auto& g : t->ensure_grad()) g = static_cast<float>((rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.1 + std::abs(rng.normal())));  // |g| >> eps
    const auto start = p.cast<double>();
    adam_step(p, fresh, cfg);
    for (std::size_t k = 0; k < p.tensors.size(); ++k)
        for (std::size_t i = 0; i < p.tensors[k].second->numel(); ++i) {
            const double d = std::abs(double(p.tensors[k].second->value[i]) - start.tensors[k].second->value[i]);
            ASSERT_NEAR(d, cfg.lr, 1e-6 * cfg.lr + 1e-7 * std::abs(start.tensors[k].second->value[i]));
        }
}

TEST(Adam, StateMismatch) {
    Rng rng(20);
    auto p = make_params<float>(ModelSpec{3, 4, 1, 2, 0.2}, rng);
    AdamState<float> st(make_params<float>(ModelSpec{3, 4, 2, 2, 0.2}, rng));
    EXPECT_THROW(adam_step(p, st, {}), DataError);
}

TEST(Checkpoint, RoundTripAndErrors) {
    test::TempDir dir;
    auto pd = random_model(ModelSpec{3, 4, 1, 2, 0.2}, 21);
    const auto p = pd.cast<float>();
    save_checkpoint(p, dir / "m.srw", {{"note", "x"}});
    const auto ck = load_checkpoint(dir / "m.srw");
    EXPECT_EQ(ck.params.spec, p.spec);
    EXPECT_EQ(ck.meta["note"], "x");
    ASSERT_EQ(ck.params.tensors.size(), p.tensors.size());
    for (std::size_t k = 0; k < p.tensors.size(); ++k) {
        EXPECT_EQ(ck.params.tensors[k].first, p.tensors[k].first);
        EXPECT_EQ(std::memcmp(ck.params.tensors[k].second->value.data(), p.tensors[k].second->value.data(), p.tensors[k].second->numel() * 4), 0);
    }
    EXPECT_EQ(encode_checkpoint(ck.params, ck.meta), read_file_bytes(dir / "m.srw"));

    const std::string bytes = read_file_bytes(dir / "m.srw");
    test::expect_data_error([&] { decode_checkpoint("XXXX" + bytes.substr(4)); }, "magic");
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
    EXPECT_THROW(load_checkpoint(dir / "none.srw"), DataError);

    // Spec header that disagrees with the stored tensors.
    auto other = p.cast<float>();
    other.spec.num_rrdb = 2;
    EXPECT_THROW(decode_checkpoint(encode_checkpoint(other)), DataError);
}

TEST(Train, DeterministicAndZeroLr) {
    Rng rng(22);
    LoadedPair pair;
    pair.hr = Raster(3, 16, 16);
    for (auto& v : pair.hr.data) v = static_cast<float>(2000.0 + 500.0 * rng.normal());
    pair.lr = Raster(3, 8, 8);
    for (int b = 0; b < 3; ++b)
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) pair.lr.at(b, r, c) = pair.hr.at(b, 2 * r, 2 * c);
    TrainConfig cfg;
    cfg.iterations = 10;
    cfg.batch = 2;
    cfg.patch = 8;
    cfg.seed = 3;
    cfg.adam.lr = 1e-3;
    const ModelSpec spec{3, 4, 1, 2, 0.2};
    const auto a = train({pair}, spec, cfg);
    const auto b = train({pair}, spec, cfg);
    EXPECT_EQ(a.loss_history, b.loss_history);
    for (std::size_t k = 0; k < a.params.tensors.size(); ++k) EXPECT_EQ(a.params.tensors[k].second->value, b.params.tensors[k].second->value);
    EXPECT_EQ(a.loss_history.size(), 10U);

    cfg.adam.lr = 0.0;
    const auto z = train({pair}, spec, cfg);
    Rng init(3);
    const auto fresh = make_params<float>(spec, init);
    for (std::size_t k = 0; k < z.params.tensors.size(); ++k) EXPECT_EQ(z.params.tensors[k].second->value, fresh.tensors[k].second->value);
    for (double l : z.loss_history) EXPECT_EQ(l, z.loss_history.front());

    EXPECT_THROW(train({}, spec, cfg), DataError);
    LoadedPair bad = pair;
    bad.hr = Raster(3, 16, 15);
    EXPECT_THROW(train({bad}, spec, cfg), DataError);
    EXPECT_NE(loss_csv({0.5, 0.25}).find("1,0.25"), std::string::npos);
}
