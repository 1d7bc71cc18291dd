#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "recode/model.hpp"
#include "recode/repeat.hpp"
#include "recode/rng.hpp"

using namespace recode;

namespace {

constexpr std::int64_t kDay = 86400;

UserHistory history_of(std::initializer_list<Event> events) {
    UserHistory h;
    h.user = 0;
    h.events = events;
    std::stable_sort(h.events.begin(), h.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    return h;
}

}  // namespace

TEST_SUITE_BEGIN("repeat");

TEST_CASE("gaps of a never-consumed item are empty") {
    const UserHistory h = history_of({{1, 0}, {2, 5 * kDay}});
    const RepeatGaps g = extract_gaps(h, 9, 10 * kDay, {1.0, 20});
    CHECK(g.empty());
}

TEST_CASE("gap arithmetic and ascending order") {
    const UserHistory h = history_of({{7, 0}, {7, 5 * kDay}, {3, 6 * kDay}});
    const RepeatGaps g = extract_gaps(h, 7, 10 * kDay, {1.0, 20});
    REQUIRE(g.size() == 2);
    CHECK(g.gaps[0] == 5.0);
    CHECK(g.gaps[1] == 10.0);
}

TEST_CASE("events at or after the target time never count") {
    const UserHistory h = history_of({{7, 2 * kDay}, {7, 10 * kDay}, {7, 11 * kDay}});
    const RepeatGaps g = extract_gaps(h, 7, 10 * kDay, {1.0, 20});
    REQUIRE(g.size() == 1);
    CHECK(g.gaps[0] == 8.0);
}

TEST_CASE("only the most recent consumptions survive the cap") {
    UserHistory h;
    h.user = 0;
    for (int i = 0; i < 25; ++i) h.events.push_back({4, i * kDay});
    const RepeatGaps g = extract_gaps(h, 4, 30 * kDay, {1.0, 20});
    REQUIRE(g.size() == 20);
    // 20 smallest gaps: consumptions at days 5..24 -> gaps 6..25
    CHECK(g.gaps.front() == 6.0);
    CHECK(g.gaps.back() == 25.0);
    CHECK(std::is_sorted(g.gaps.begin(), g.gaps.end()));
}

TEST_CASE("the default scale divides day gaps by thirty") {
    const UserHistory h = history_of({{1, 0}});
    const RepeatGaps g = extract_gaps(h, 1, 60 * kDay, {});
    REQUIRE(g.size() == 1);
    CHECK(g.gaps[0] == doctest::Approx(2.0));
}

TEST_CASE("empty gaps score exactly zero") {
    ParameterStore store;
    RepeatModuleSpec spec;
    spec.dim = 4;
    spec.d_ode = 4;
    const RepeatModule m = make_repeat_module(store, spec, 3);
    Graph g(store);
    const NodeId s = repeat_score(g, m, g.constant(Tensor::zeros(4)),
                                  g.constant(Tensor::zeros(4)), RepeatGaps{});
    CHECK(g.scalar_value(s) == 0.0);
}

TEST_CASE("a zero-weight decoder with output bias beta scores n*beta") {
    ParameterStore store;
    RepeatModuleSpec spec;
    spec.dim = 4;
    spec.d_ode = 4;
    const RepeatModule m = make_repeat_module(store, spec, 5);
    store.find("repeat.decoder.w0")->value.set_zero();
    store.find("repeat.decoder.w1")->value.set_zero();
    store.find("repeat.decoder.b1")->value[0] = 0.25;  // exact in binary

    Rng rng(6);
    Tensor e_u = Tensor::zeros(4), e_i = Tensor::zeros(4);
    for (double& v : e_u.values()) v = rng.normal();
    for (double& v : e_i.values()) v = rng.normal();

    for (const std::size_t n : {1u, 3u, 7u}) {
        RepeatGaps gaps;
        for (std::size_t k = 1; k <= n; ++k) gaps.gaps.push_back(0.5 * static_cast<double>(k));
        Graph g(store);
        const double got =
            g.scalar_value(repeat_score(g, m, g.constant(e_u), g.constant(e_i), gaps));
        CHECK(got == 0.25 * static_cast<double>(n));
    }
}

TEST_CASE("a zero field freezes the state at the encoder output") {
    ParameterStore store;
    RepeatModuleSpec spec;
    spec.dim = 3;
    spec.d_ode = 5;
    const RepeatModule m = make_repeat_module(store, spec, 7);
    store.find("repeat.ode.w0")->value.set_zero();
    store.find("repeat.ode.w1")->value.set_zero();

    Rng rng(8);
    Tensor e_u = Tensor::zeros(3), e_i = Tensor::zeros(3);
    for (double& v : e_u.values()) v = rng.normal();
    for (double& v : e_i.values()) v = rng.normal();

    RepeatGaps gaps;
    gaps.gaps = {0.2, 0.9, 1.4, 2.0};
    Graph g(store);
    const double got =
        g.scalar_value(repeat_score(g, m, g.constant(e_u), g.constant(e_i), gaps));

    // compose encoder and decoder directly
    Graph ref(store);
    const NodeId h0 =
        mlp_forward(ref, m.encoder_spec, m.encoder, ref.concat(ref.constant(e_u), ref.constant(e_i)));
    const double one = ref.scalar_value(ref.sum_all(mlp_forward(ref, m.decoder_spec, m.decoder, h0)));
    const double expect = ((one + one) + one) + one;  // the same summation order
    CHECK(got == expect);
}

TEST_CASE("hand-set near-linear field reproduces the exponential kernel") {
    // W1 = eps*I, W2 = (-rate/eps)*I makes f(h) = -rate*h up to O(eps^2)
    const double rate = 1.0;
    const double eps = 1e-4;
    ParameterStore store;
    RepeatModuleSpec spec;
    spec.dim = 2;
    spec.d_ode = 3;
    spec.solve = {SolveMethod::rk4, 10};
    const RepeatModule m = make_repeat_module(store, spec, 9);

    store.find("repeat.ode.w0")->value.set_zero();
    store.find("repeat.ode.w1")->value.set_zero();
    for (std::size_t i = 0; i < 3; ++i) {
        store.find("repeat.ode.w0")->value.at(i, i) = eps;
        store.find("repeat.ode.w1")->value.at(i, i) = -rate / eps;
    }
    // encoder frozen at h0 = tanh(b) = 0.5 per coordinate
    store.find("repeat.encoder.w0")->value.set_zero();
    store.find("repeat.encoder.w1")->value.set_zero();
    const double b_enc = std::atanh(0.5);
    for (std::size_t i = 0; i < 3; ++i) store.find("repeat.encoder.b1")->value[i] = b_enc;
    // near-linear decoder: (c/(eps*d)) * sum tanh(eps*h), c = 1
    store.find("repeat.decoder.w0")->value.set_zero();
    store.find("repeat.decoder.w1")->value.set_zero();
    for (std::size_t i = 0; i < 3; ++i) {
        store.find("repeat.decoder.w0")->value.at(i, i) = eps;
        store.find("repeat.decoder.w1")->value[i] = 1.0 / (3.0 * eps);
    }

    RepeatGaps gaps;
    gaps.gaps = {0.3, 1.0, 2.2};
    Graph g(store);
    const double got = g.scalar_value(
        repeat_score(g, m, g.constant(Tensor::zeros(2)), g.constant(Tensor::zeros(2)), gaps));

    // unit-state kernel scaled by the 0.5 initial state
    const double expect = parametric_repeat_score(gaps, ExponentialKernel{rate, 0.5});
    CHECK(std::abs(got - expect) < 1e-5);
}

TEST_CASE("repeat_score ignores raw history order") {
    SyntheticConfig cfg;
    cfg.num_users = 1;
    cfg.num_items = 10;
    cfg.interactions_per_user = 40;
    cfg.repeat_prob = 0.7;
    cfg.rng_seed = 12;
    const InteractionLog log = generate_synthetic(cfg);

    ParameterStore store;
    RepeatModuleSpec spec;
    spec.dim = 4;
    spec.d_ode = 4;
    const RepeatModule m = make_repeat_module(store, spec, 10);
    Rng rng(13);
    Tensor e_u = Tensor::zeros(4), e_i = Tensor::zeros(4);
    for (double& v : e_u.values()) v = rng.normal();
    for (double& v : e_i.values()) v = rng.normal();

    std::vector<Interaction> rows = log.interactions;
    const auto base_hist = build_histories(rows, 1)[0];
    rng.shuffle(rows);
    const auto shuf_hist = build_histories(rows, 1)[0];

    const std::int64_t target = base_hist.events.back().time + kDay;
    for (std::int32_t item = 0; item < 10; ++item) {
        const RepeatGaps a = extract_gaps(base_hist, item, target, {1.0, 20});
        const RepeatGaps b = extract_gaps(shuf_hist, item, target, {1.0, 20});
        REQUIRE(a.size() == b.size());
        if (a.empty()) continue;
        Graph ga(store), gb(store);
        CHECK(ga.scalar_value(repeat_score(ga, m, ga.constant(e_u), ga.constant(e_i), a)) ==
              gb.scalar_value(repeat_score(gb, m, gb.constant(e_u), gb.constant(e_i), b)));
    }
}

TEST_CASE("repeat_score gradients pass the finite-difference check") {
    ParameterStore store;
    RepeatModuleSpec spec;
    spec.dim = 3;
    spec.d_ode = 4;
    spec.solve = {SolveMethod::euler, 4};
    const RepeatModule m = make_repeat_module(store, spec, 15);
    Parameter& e_u = store.create("e_u", Tensor::vector({0.3, -0.2, 0.8}));
    Parameter& e_i = store.create("e_i", Tensor::vector({-0.5, 0.1, 0.4}));
    RepeatGaps gaps;
    gaps.gaps = {0.4, 1.1};

    auto loss = [&]() -> double {
        Graph g(store);
        return g.scalar_value(repeat_score(g, m, g.param(e_u), g.param(e_i), gaps));
    };
    Graph g(store);
    GradientBuffer grads(store);
    g.backward(repeat_score(g, m, g.param(e_u), g.param(e_i), gaps), grads);

    double worst = 0.0;
    const double fd_eps = 1e-5;
    for (std::size_t pi = 0; pi < store.size(); ++pi) {
        Parameter& p = store.at(pi);
        for (std::size_t c = 0; c < p.value.numel(); ++c) {
            const double orig = p.value[c];
            p.value[c] = orig + fd_eps;
            const double lp = loss();
            p.value[c] = orig - fd_eps;
            const double lm = loss();
            p.value[c] = orig;
            const double numeric = (lp - lm) / (2.0 * fd_eps);
            const double analytic = grads.at(pi)[c];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("graph size grows linearly with the gap count") {
    ParameterStore store;
    RepeatModuleSpec spec;
    spec.dim = 3;
    spec.d_ode = 3;
    const RepeatModule m = make_repeat_module(store, spec, 16);
    std::vector<std::size_t> sizes;
    for (const std::size_t n : {1u, 2u, 3u, 4u, 8u}) {
        RepeatGaps gaps;
        for (std::size_t k = 1; k <= n; ++k) gaps.gaps.push_back(0.3 * static_cast<double>(k));
        Graph g(store);
        repeat_score(g, m, g.constant(Tensor::zeros(3)), g.constant(Tensor::zeros(3)), gaps);
        sizes.push_back(g.size());
    }
    const std::size_t per_gap = sizes[1] - sizes[0];
    CHECK(sizes[2] - sizes[1] == per_gap);
    CHECK(sizes[3] - sizes[2] == per_gap);
    CHECK(sizes[4] - sizes[3] == 4 * per_gap);
}

TEST_CASE("parametric kernels evaluate their closed forms") {
    RepeatGaps tiny;
    tiny.gaps = {1e-12};
    CHECK(parametric_repeat_score(tiny, ExponentialKernel{1.0, 2.0}) ==
          doctest::Approx(2.0).epsilon(1e-9));

    RepeatGaps one;
    one.gaps = {1.0};
    CHECK(parametric_repeat_score(one, ExponentialKernel{1.0, 1.0}) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    // gaussian kernel peaks at the mean gap
    const GaussianKernel gk{2.0, 1.0, 1.0};
    auto at = [&](double gap) {
        RepeatGaps g;
        g.gaps = {gap};
        return parametric_repeat_score(g, gk);
    };
    CHECK(at(2.0) > at(1.5));
    CHECK(at(2.0) > at(2.5));
    CHECK(at(2.0) == doctest::Approx(std::exp(4.0 / 2.0)));  // exp(mu^2 / (2 sigma^2))
    CHECK_THROWS_AS(parametric_repeat_score(one, ExponentialKernel{-1.0, 1.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(parametric_repeat_score(one, GaussianKernel{1.0, 0.0, 1.0}),
                    std::invalid_argument);
}

TEST_CASE("trainable kernels match the closed form and their gradients check out") {
    for (const KernelKind kind : {KernelKind::exponential, KernelKind::gaussian}) {
        ParameterStore store;
        const ParametricModule m = make_parametric_module(store, kind, 0.8, 0.4);
        store.find("parametric.amplitude")->value[0] = 1.7;
        RepeatGaps gaps;
        gaps.gaps = {0.2, 0.9, 1.6};

        Graph g(store);
        const NodeId s = parametric_score(g, m, gaps);
        double expect = 0.0;
        if (kind == KernelKind::exponential) {
            expect = parametric_repeat_score(
                gaps, ExponentialKernel{std::exp(store.find("parametric.log_rate")->value[0]), 1.7});
        } else {
            expect = parametric_repeat_score(
                gaps, GaussianKernel{store.find("parametric.mu")->value[0],
                                     std::exp(store.find("parametric.log_sigma")->value[0]), 1.7});
        }
        CHECK(g.scalar_value(s) == doctest::Approx(expect).epsilon(1e-13));

        GradientBuffer grads(store);
        g.backward(s, grads);
        auto loss = [&]() -> double {
            Graph gg(store);
            return gg.scalar_value(parametric_score(gg, m, gaps));
        };
        const double fd_eps = 1e-6;
        for (std::size_t pi = 0; pi < store.size(); ++pi) {
            Parameter& p = store.at(pi);
            const double orig = p.value[0];
            p.value[0] = orig + fd_eps;
            const double lp = loss();
            p.value[0] = orig - fd_eps;
            const double lm = loss();
            p.value[0] = orig;
            const double numeric = (lp - lm) / (2.0 * fd_eps);
            CHECK(grads.at(pi)[0] == doctest::Approx(numeric).epsilon(1e-5));
        }
    }
}

TEST_CASE("fused score is the plain sum of the two routes") {
    SyntheticConfig dcfg;
    dcfg.num_users = 4;
    dcfg.num_items = 20;
    dcfg.interactions_per_user = 30;
    dcfg.repeat_prob = 0.5;
    dcfg.rng_seed = 18;
    const auto hists = build_histories(generate_synthetic(dcfg));

    ModelSpec spec;
    spec.dim = 4;
    spec.arm = RepeatArm::exponential;
    Model model = Model::build(spec, 4, 20, 19);
    model.store.find("parametric.amplitude")->value[0] = 0.9;

    const UserHistory& h = hists[1];
    const std::int64_t target = h.events.back().time + kDay;
    bool found_repeat = false;
    for (std::int32_t item = 0; item < 20; ++item) {
        const RepeatGaps gaps = extract_gaps(h, item, target, model.gap_config());
        Graph g(model.store);
        const double fused = g.scalar_value(model.fused(g, 1, item, gaps));
        Graph gs(model.store);
        const auto [e_u, e_i] = embed(gs, model.backbone, 1, item);
        const double sta = gs.scalar_value(static_score(gs, model.backbone, e_u, e_i));
        if (gaps.empty()) {
            CHECK(fused == sta);  // bit-exact reduction on novel items
        } else {
            found_repeat = true;
            const double rep = parametric_repeat_score(
                gaps,
                ExponentialKernel{std::exp(model.store.find("parametric.log_rate")->value[0]),
                                  0.9});
            CHECK(fused == sta + rep);  // no rescaling, no gate
        }
    }
    CHECK(found_repeat);
}

TEST_SUITE_END();
