// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only N[,N...]] [--expect-fail N[,N...]]
//
// Exit status is 0 when every criterion passes, except those named by
// --expect-fail, which are reported but do not fail the run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "pixtime/harness.hpp"
#include "pixtime/layers.hpp"
#include "pixtime/ops.hpp"

using namespace pixtime;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

NDArray random_array(std::mt19937_64& rng, Shape shape, double sigma = 1.0) {
    std::normal_distribution<double> n(0.0, sigma);
    NDArray a(std::move(shape));
    for (double& v : a.data) {
        v = n(rng);
    }
    return a;
}

// 1. Gradient fidelity on the tiny model, all three workflows.
Outcome gradient_fidelity() {
    GradCheckConfig g;  // D=8, L=1, H=2, T=8, PL=4, C=2, S=4, h=1e-5
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<GradCheckResult> results = run_gradcheck(g, 0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Outcome o;
    o.pass = secs < 120.0;
    std::ostringstream s;
    for (const GradCheckResult& r : results) {
        o.pass = o.pass && r.report.passed && r.report.max_rel_error < 1e-4;
        s << task_name(r.task) << " max rel err " << fmt("%.2e", r.report.max_rel_error) << "; ";
    }
    s << fmt("%.1f s", secs);
    o.detail = s.str();
    return o;
}

// 2. Primitive ops against naive loops over 20 seeds.
Outcome primitive_oracles() {
    double worst[5] = {0, 0, 0, 0, 0};  // attention, layer_norm, softmax, ffn, projection
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t d = 4 + 2 * (seed % 3);
        const std::size_t heads = (seed % 2 == 0) ? 2 : 1;
        const std::size_t nq = 1 + seed % 4;
        const std::size_t nk = 1 + (seed / 2) % 5;
        Tape t;

        Parameter w_q("w_q", random_array(rng, {d, d}, 0.5)), b_q("b_q", random_array(rng, {d}, 0.1));
        Parameter w_k("w_k", random_array(rng, {d, d}, 0.5));
        Parameter w_v("w_v", random_array(rng, {d, d}, 0.5)), b_v("b_v", random_array(rng, {d}, 0.1));
        Parameter w_o("w_o", random_array(rng, {d, d}, 0.5)), b_o("b_o", random_array(rng, {d}, 0.1));
        const AttentionWeights aw{t.param(w_q), t.param(b_q), t.param(w_k), t.param(w_v),
                                  t.param(b_v), t.param(w_o), t.param(b_o)};
        const oracle::Attention ow{oracle::to_mat(w_q.value), oracle::to_mat(w_k.value), oracle::to_mat(w_v.value),
                                   oracle::to_mat(w_o.value), b_q.value.data,           b_v.value.data,
                                   b_o.value.data};
        const oracle::Mat q = oracle::random_mat(rng, nq, d);
        const oracle::Mat kv = oracle::random_mat(rng, nk, d);
        const NDArray att = multi_head_attention(t.constant(oracle::to_array(q)), t.constant(oracle::to_array(kv)),
                                                 t.constant(oracle::to_array(kv)), aw, heads)
                                .value();
        worst[0] = std::max(worst[0], oracle::max_diff(oracle::to_mat(att), oracle::attention(q, kv, kv, ow, heads)));

        const oracle::Vec x = oracle::random_vec(rng, d, 2.0);
        const oracle::Vec gain = oracle::random_vec(rng, d);
        const oracle::Vec bias = oracle::random_vec(rng, d);
        const NDArray ln = ops::layer_norm(t.constant(NDArray({d}, x)), t.constant(NDArray({d}, gain)),
                                           t.constant(NDArray({d}, bias)), 1e-5)
                               .value();
        worst[1] = std::max(worst[1], oracle::max_diff(ln.data, oracle::layer_norm(x, gain, bias, 1e-5)));

        const NDArray sm = ops::softmax(t.constant(NDArray({d}, x)), 0).value();
        worst[2] = std::max(worst[2], oracle::max_diff(sm.data, oracle::softmax(x)));

        const oracle::Ffn fw{oracle::random_mat(rng, d, 2 * d, 0.5), oracle::random_mat(rng, 2 * d, d, 0.5),
                             oracle::random_vec(rng, 2 * d), oracle::random_vec(rng, d)};
        const NDArray ff = ffn(t.constant(oracle::to_array(q)),
                               FfnWeights{t.constant(oracle::to_array(fw.w1)), t.constant(NDArray({2 * d}, fw.b1)),
                                          t.constant(oracle::to_array(fw.w2)), t.constant(NDArray({d}, fw.b2))})
                               .value();
        worst[3] = std::max(worst[3], oracle::max_diff(oracle::to_mat(ff), oracle::ffn(q, fw)));

        // Projection: drop row 0, flatten, one linear map.
        const std::size_t m = 1 + seed % 3;
        const std::size_t horizon = 1 + seed % 4;
        NodeShapeConfig shape;
        shape.lookback = m * 2;
        shape.patch_len = 2;
        shape.horizon = horizon;
        shape.var_ids = {0};
        ModelDims dims;
        dims.d_model = d;
        dims.layers = 1;
        dims.heads = heads;
        dims.d_ff = 4;
        dims.n_all = 1;
        PiXTimeModel model(dims, shape, seed, seed + 1);
        model.params().get("projection.bias").value = random_array(rng, {horizon});
        const oracle::Mat tokens = oracle::random_mat(rng, m + 1, d);
        NDArray tok = oracle::to_array(tokens);
        tok.shape.insert(tok.shape.begin(), 1);
        const NDArray pr = model.projection(t, t.constant(tok)).value();
        const oracle::Mat w = oracle::to_mat(model.params().get("projection.weight").value);
        oracle::Vec ref = model.params().get("projection.bias").value.data;
        for (std::size_t s = 0; s < horizon; ++s) {
            for (std::size_t p = 0; p < m; ++p) {
                for (std::size_t j = 0; j < d; ++j) {
                    ref[s] += tokens[p + 1][j] * w[p * d + j][s];
                }
            }
        }
        worst[4] = std::max(worst[4], oracle::max_diff(pr.data, ref));
    }
    Outcome o;
    o.pass = true;
    std::ostringstream s;
    const char* names[] = {"attention", "layer_norm", "softmax", "ffn", "projection"};
    for (int i = 0; i < 5; ++i) {
        o.pass = o.pass && worst[i] < 1e-10;
        s << names[i] << " " << fmt("%.1e", worst[i]) << (i < 4 ? ", " : "");
    }
    o.detail = s.str() + " (20 seeds)";
    return o;
}

ExperimentConfig base_config() {
    ExperimentConfig c;
    c.mode = Mode::Federated;
    c.nodes = {NodeConfig{}, NodeConfig{}};
    return c;
}

// 3. Four heterogeneous nodes share one parameter layout and run a round.
Outcome heterogeneity() {
    ExperimentConfig c = base_config();
    const std::size_t strides[] = {1, 2, 4, 1};
    const std::size_t counts[] = {3, 5, 2, 7};
    c.nodes.clear();
    for (int i = 0; i < 4; ++i) {
        NodeConfig n;
        n.stride = strides[i];
        n.aux_count = counts[i];
        c.nodes.push_back(n);
    }
    c.rounds = 1;
    c.optimizer.epochs = 1;
    c.validate();
    const LoadedData data = load_dataset(c);
    const std::vector<ResolvedNode> nodes = resolve_nodes(c, data);
    std::vector<Client> clients = build_clients(c, data, nodes);
    bool same = true;
    const auto ref = shared_shapes(clients[0].model().params());
    for (const Client& cl : clients) {
        same = same && shared_shapes(cl.model().params()) == ref;
    }
    FederationOptions f;
    f.rounds = 1;
    const FederationResult r = run_federation(clients, f);
    bool shapes_ok = true;
    std::ostringstream s;
    for (Client& cl : clients) {
        const NodeShapeConfig& sh = cl.model().shape();
        const std::vector<std::size_t>& w = cl.data().windows(Split::Test);
        const Batch b = cl.data().batch(std::span<const std::size_t>(w.data(), 3));
        const NDArray y = cl.model().predict(b);
        shapes_ok = shapes_ok && y.shape == Shape{3, sh.horizon};
        s << "T=" << sh.lookback << " PL=" << sh.patch_len << " C=" << sh.aux_count() << " S=" << y.shape[1] << "; ";
    }
    Outcome o;
    o.pass = same && shapes_ok && r.rounds.size() == 1;
    o.detail = s.str() + (same ? "shared maps identical" : "shared maps differ");
    return o;
}

std::string round_trip(const ValueMap& values) {
    std::ostringstream s;
    s.precision(17);
    for (const auto& [name, v] : values) {
        s << name;
        for (double x : v.data) {
            s << ' ' << x;
        }
        s << '\n';
    }
    return s.str();
}

// 4. One-node federation equals local training.
Outcome federation_identity() {
    ExperimentConfig c = base_config();
    c.nodes = {NodeConfig{}};
    c.rounds = 5;
    c.optimizer.epochs = 10;
    c.dataset.synthetic.length = 1500;
    const LoadedData data = load_dataset(c);
    const std::vector<ResolvedNode> nodes = resolve_nodes(c, data);
    std::vector<Client> fed = build_clients(c, data, nodes);
    std::vector<Client> solo = build_clients(c, data, nodes);
    FederationOptions f;
    f.rounds = c.rounds;
    run_federation(fed, f);
    for (std::size_t e = 0; e < c.optimizer.epochs; ++e) {
        solo[0].train_epoch();
    }
    double diff = 0.0;
    bool bitwise = true;
    for (const Parameter& p : solo[0].model().params()) {
        const NDArray& q = fed[0].model().params().get(p.name).value;
        diff = std::max(diff, max_abs_diff(p.value, q));
        bitwise = bitwise && bit_equal(p.value, q);
    }
    const bool text_equal = round_trip(solo[0].model().params().values()) == round_trip(fed[0].model().params().values());
    Outcome o;
    o.pass = diff < 1e-12 && text_equal;
    o.detail = "max diff " + fmt("%.1e", diff) + (bitwise ? ", bit-identical" : "") + ", 5 rounds x 2 epochs";
    return o;
}

// 5. VE rows follow only the nodes that hold the category.
Outcome ve_masking() {
    ExperimentConfig c = base_config();
    c.dataset.synthetic.n_vars = 6;
    c.dataset.synthetic.length = 1500;
    c.dataset.synthetic.drivers = 2;
    NodeConfig a, b;
    a.aux = std::vector<std::string>{"v0", "v1"};
    b.aux = std::vector<std::string>{"v1", "v2"};
    c.nodes = {a, b};
    c.rounds = 5;
    c.optimizer.epochs = 5;
    c.optimizer.lr = 1e-3;
    c.validate();
    const LoadedData data = load_dataset(c);
    std::vector<Client> clients = build_clients(c, data, resolve_nodes(c, data));
    const std::size_t d = c.dims.d_model;
    const NDArray init = clients[0].model().params().get("ve_table").value;
    NDArray before = init;
    double unused_diff = 0.0;
    double single_diff = 0.0;
    double moved = 0.0;
    bool unused_bitwise = true;
    FederationOptions f;
    f.rounds = c.rounds;
    run_federation(clients, f, [&](const RoundRecord&, std::span<const ClientDelta> deltas) {
        const NDArray& now = clients[0].model().params().get("ve_table").value;
        const ClientDelta& owner = deltas[0].node_id == 0 ? deltas[0] : deltas[1];
        const NDArray& dv = owner.deltas.at("ve_table");
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t row : {3u, 4u}) {  // v3, v4: nobody holds them
                unused_diff = std::max(unused_diff, std::abs(now.data[row * d + j] - init.data[row * d + j]));
                unused_bitwise = unused_bitwise && now.data[row * d + j] == init.data[row * d + j];
            }
            // v0 belongs to node 0 only.
            single_diff = std::max(single_diff, std::abs(now.data[j] - (before.data[j] + dv.data[j])));
            moved = std::max(moved, std::abs(now.data[j] - before.data[j]));
        }
        before = now;
    });
    Outcome o;
    o.pass = unused_bitwise && single_diff < 1e-14 && moved > 0.0;
    o.detail = "unused rows " + std::string(unused_bitwise ? "bit-equal to init" : "changed") +
               "; single-owner row vs owner delta " + fmt("%.1e", single_diff) + " (row moved " + fmt("%.1e", moved) +
               ")";
    return o;
}

// 6. Aggregation algebra.
Outcome aggregation_algebra() {
    auto delta = [](int id, double w, std::vector<double> v) {
        ClientDelta d;
        d.node_id = id;
        d.weight = w;
        const std::size_t n = v.size();
        d.deltas.emplace("x", NDArray({n}, std::move(v)));
        return d;
    };
    const ClientDelta spot[] = {delta(0, 1, {0}), delta(1, 3, {4})};
    const double spot_value = aggregate(spot).at("x").data[0];
    const ClientDelta one[] = {delta(3, 2.5, {0.1, -7, 1e-3})};
    const bool identity = bit_equal(aggregate(one).at("x"), one[0].deltas.at("x"));
    std::mt19937_64 rng(5);
    std::vector<ClientDelta> many;
    for (int id = 0; id < 7; ++id) {
        many.push_back(delta(id, 0.5 + id, random_array(rng, {16}).data));
    }
    const NDArray ref = aggregate(many).at("x");
    bool perm = true;
    for (int i = 0; i < 20; ++i) {
        std::shuffle(many.begin(), many.end(), rng);
        perm = perm && bit_equal(aggregate(many).at("x"), ref);
    }
    Outcome o;
    o.pass = spot_value == 3.0 && identity && perm;
    o.detail = "{0,4} w {1,3} -> " + fmt("%g", spot_value) + "; single identity " + (identity ? "ok" : "broken") +
               "; 20 permutations " + (perm ? "bit-identical" : "differ");
    return o;
}

// 7. Learning signal against persistence.
Outcome learning_signal() {
    std::vector<double> ratios, mses, persist;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        ExperimentConfig c = base_config();
        c.seed = seed;
        c.validate();
        const RunResult r = run_training(c, load_dataset(c));
        ratios.push_back(r.mse / r.persistence_mse);
        mses.push_back(r.mse);
        persist.push_back(r.persistence_mse);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double ratio = median(ratios);
    Outcome o;
    o.pass = ratio <= 0.7 && secs < 600.0;
    o.detail = "median test MSE " + fmt("%.4f", median(mses)) + " vs persistence " + fmt("%.4f", median(persist)) +
               ", median ratio " + fmt("%.3f", ratio) + " (need <= 0.70); " + fmt("%.0f s", secs);
    return o;
}

// 8. Granularity mix.
Outcome granularity_mix() {
    ExperimentConfig c = base_config();
    c.mode = Mode::AblateGranularity;
    c.nodes = {NodeConfig{}};
    const GranularityReport g = ablate_granularity(c);
    const bool coarse = g.coarse_improves();
    const bool fine = g.fine_within(1.05);
    Outcome o;
    o.pass = coarse && fine;
    o.detail = "coarse: mix " + fmt("%.4f", g.mix_coarse_mse) + " vs solo " + fmt("%.4f", g.coarse_only_mse) +
               (coarse ? " ok" : " WORSE") + "; fine: mix " + fmt("%.4f", g.mix_fine_mse) + " vs solo " +
               fmt("%.4f", g.fine_only_mse) + " (ratio " + fmt("%.3f", g.mix_fine_mse / g.fine_only_mse) + ", need <= 1.05)";
    return o;
}

// 9. VE ablation.
Outcome ve_ablation() {
    ExperimentConfig c = base_config();
    c.mode = Mode::AblateVe;
    const VeReport r = ablate_ve(c);
    Outcome o;
    o.pass = !r.sweep.empty();
    std::ostringstream s;
    for (const VeSweepPoint& p : r.sweep) {
        const double ratio = p.ve_mse / p.nove_mse;
        o.pass = o.pass && ratio <= 1.05 && p.step0_identical;
        s << "k=" << p.subset_size << ": VE " << fmt("%.4f", p.ve_mse) << " vs NoVE " << fmt("%.4f", p.nove_mse)
          << " (ratio " << fmt("%.4f", ratio) << "), step 0 " << (p.step0_identical ? "bit-identical" : "differs")
          << "; ";
    }
    o.detail = s.str() + "8 nodes, 3 seeds";
    return o;
}

// 10. Replay determinism of the metrics document.
Outcome determinism() {
    ExperimentConfig c = base_config();
    NodeConfig coarse;
    coarse.stride = 4;
    coarse.aux_count = 4;
    c.nodes = {NodeConfig{}, coarse};
    c.rounds = 2;
    c.optimizer.epochs = 2;
    c.seed = 17;
    const std::string a = run_experiment(c, false).metrics.dump();
    const std::string b = run_experiment(c, false).metrics.dump();
    c.parallel_clients = true;
    const std::string p = run_experiment(c, false).metrics.dump();
    ExperimentConfig g;
    g.mode = Mode::GradCheck;
    const std::string ga = run_experiment(g, false).metrics.dump();
    const std::string gb = run_experiment(g, false).metrics.dump();
    Outcome o;
    o.pass = a == b && a == p && ga == gb;
    o.detail = std::string("federated replay ") + (a == b ? "identical" : "differs") + ", threaded " +
               (a == p ? "identical" : "differs") + ", gradcheck replay " + (ga == gb ? "identical" : "differs") + " (" +
               std::to_string(a.size()) + " bytes)";
    return o;
}

std::set<int> parse_list(const std::string& s) {
    std::set<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.insert(std::stoi(item));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only, expect_fail;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if ((arg == "--only" || arg == "--expect-fail") && i + 1 < argc) {
            (arg == "--only" ? only : expect_fail) = parse_list(argv[++i]);
        } else {
            std::cerr << "usage: acceptance [--only N,...] [--expect-fail N,...]\n";
            return 2;
        }
    }

    using Check = Outcome (*)();
    const std::pair<const char*, Check> checks[] = {
        {"gradient fidelity", gradient_fidelity},   {"primitive oracles", primitive_oracles},
        {"heterogeneity shape contract", heterogeneity}, {"federation identity", federation_identity},
        {"VE masking", ve_masking},                 {"aggregation algebra", aggregation_algebra},
        {"learning signal", learning_signal},       {"granularity mix", granularity_mix},
        {"VE ablation", ve_ablation},               {"determinism", determinism},
    };
    int unexpected = 0;
    for (int i = 0; i < 10; ++i) {
        const int id = i + 1;
        if (!only.empty() && only.count(id) == 0) {
            continue;
        }
        Outcome o;
        try {
            o = checks[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        const bool waived = expect_fail.count(id) != 0;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << checks[i].first << ": " << o.detail;
        if (!o.pass && waived) {
            std::cout << " [expected]";
        }
        std::cout << std::endl;
        if (!o.pass && !waived) {
            ++unexpected;
        }
    }
    return unexpected == 0 ? 0 : 1;
}
