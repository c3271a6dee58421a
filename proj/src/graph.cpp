#include "xtrack/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "xtrack/errors.hpp"

namespace xtrack {

std::string StarGraph::to_string() const {
    std::ostringstream os;
    os << "nodes:" << node_count << ";self_loops:" << (self_loops ? 1 : 0) << ";edges:";
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (i) os << ',';
        os << edges[i].first << '>' << edges[i].second;
    }
    return os.str();
}

StarGraph build_star_graph(int num_neighbors) {
    if (num_neighbors < 0) throw UsageError("build_star_graph: negative neighbor count");
    StarGraph g;
    g.node_count = num_neighbors + 1;
    g.edges.reserve(static_cast<std::size_t>(num_neighbors));
    for (int j = 1; j <= num_neighbors; ++j) g.edges.emplace_back(j, 0);
    return g;
}

std::vector<Tensor> GatLayerParams::parameters() const {
    std::vector<Tensor> out;
    for (const auto& h : heads) {
        out.push_back(h.W);
        out.push_back(h.a_dst);
        out.push_back(h.a_src);
    }
    return out;
}

std::vector<Tensor> InteractionParams::parameters() const {
    std::vector<Tensor> out = layer1.parameters();
    for (const Tensor& t : layer2.parameters()) out.push_back(t);
    out.push_back(W_proj);
    out.push_back(b_proj);
    return out;
}

std::vector<Tensor> gat_layer(Tape& tape, const std::vector<Tensor>& node_feats,
                              const StarGraph& graph, const GatLayerParams& params,
                              GatAttention* hub_attention) {
    const int n = graph.node_count;
    if (static_cast<int>(node_feats.size()) != n) {
        throw DimensionError("gat_layer: " + std::to_string(node_feats.size()) +
                             " node features for " + std::to_string(n) + " nodes");
    }
    for (const auto& [src, dst] : graph.edges) {
        if (src < 0 || src >= n || dst < 0 || dst >= n) {
            throw DataError("gat_layer: edge " + std::to_string(src) + ">" +
                            std::to_string(dst) + " references a node outside 0.." +
                            std::to_string(n - 1));
        }
    }
    if (params.heads.empty()) throw UsageError("gat_layer: no attention heads");

    // In-edge source lists, self loop first.
    std::vector<std::vector<int>> in_edges(static_cast<std::size_t>(n));
    if (graph.self_loops) {
        for (int i = 0; i < n; ++i) in_edges[static_cast<std::size_t>(i)].push_back(i);
    }
    for (const auto& [src, dst] : graph.edges) {
        in_edges[static_cast<std::size_t>(dst)].push_back(src);
    }

    if (hub_attention) hub_attention->per_head.clear();
    const int k = params.head_dim();
    std::vector<std::vector<Tensor>> per_head_out;  // [head][node]
    per_head_out.reserve(params.heads.size());

    for (const GatHeadParams& head : params.heads) {
        std::vector<Tensor> transformed;
        transformed.reserve(static_cast<std::size_t>(n));
        for (const Tensor& f : node_feats) transformed.push_back(matvec(tape, head.W, f));

        std::vector<Tensor> outputs(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const auto& sources = in_edges[static_cast<std::size_t>(i)];
            if (sources.empty()) {
                outputs[static_cast<std::size_t>(i)] = Tensor::zeros({k});
                continue;
            }
            Tensor dst_score = dot(tape, head.a_dst, transformed[static_cast<std::size_t>(i)]);
            std::vector<Tensor> scores;
            std::vector<Tensor> messages;
            scores.reserve(sources.size());
            messages.reserve(sources.size());
            for (int src : sources) {
                Tensor s = add(tape, dst_score,
                               dot(tape, head.a_src, transformed[static_cast<std::size_t>(src)]));
                scores.push_back(leaky_relu(tape, s, params.attention_slope));
                messages.push_back(transformed[static_cast<std::size_t>(src)]);
            }
            Tensor attention = softmax(tape, stack(tape, scores));
            outputs[static_cast<std::size_t>(i)] = weighted_sum(tape, attention, messages);
            if (i == 0 && hub_attention) hub_attention->per_head.push_back(attention);
        }
        per_head_out.push_back(std::move(outputs));
    }

    std::vector<Tensor> combined;
    combined.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Tensor node = per_head_out[0][static_cast<std::size_t>(i)];
        if (params.concat) {
            for (std::size_t h = 1; h < per_head_out.size(); ++h) {
                node = concat(tape, node, per_head_out[h][static_cast<std::size_t>(i)]);
            }
        } else {
            for (std::size_t h = 1; h < per_head_out.size(); ++h) {
                node = add(tape, node, per_head_out[h][static_cast<std::size_t>(i)]);
            }
            node = scale(tape, node, 1.0 / static_cast<double>(per_head_out.size()));
        }
        combined.push_back(leaky_relu(tape, node, params.output_slope));
    }
    return combined;
}

double gat_kink_margin(const std::vector<Tensor>& node_feats, const StarGraph& graph,
                       const GatLayerParams& params) {
    const std::size_t n = static_cast<std::size_t>(graph.node_count);
    const int k = params.head_dim();
    const int d_in = params.input_dim();

    std::vector<std::vector<int>> in_edges(n);
    if (graph.self_loops) {
        for (std::size_t i = 0; i < n; ++i) in_edges[i].push_back(static_cast<int>(i));
    }
    for (const auto& [src, dst] : graph.edges) {
        in_edges[static_cast<std::size_t>(dst)].push_back(src);
    }

    double margin = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> combined(n);

    for (const GatHeadParams& head : params.heads) {
        std::vector<std::vector<double>> transformed(n, std::vector<double>(
                                                            static_cast<std::size_t>(k)));
        for (std::size_t i = 0; i < n; ++i) {
            for (int r = 0; r < k; ++r) {
                double acc = 0.0;
                for (int c = 0; c < d_in; ++c) {
                    acc += head.W[r * d_in + c] * node_feats[i][c];
                }
                transformed[i][static_cast<std::size_t>(r)] = acc;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto& sources = in_edges[i];
            if (sources.empty()) continue;
            double dst_score = 0.0;
            for (int r = 0; r < k; ++r) {
                dst_score += head.a_dst[r] * transformed[i][static_cast<std::size_t>(r)];
            }
            std::vector<double> weights(sources.size());
            for (std::size_t e = 0; e < sources.size(); ++e) {
                double score = dst_score;
                const auto& src = transformed[static_cast<std::size_t>(sources[e])];
                for (int r = 0; r < k; ++r) score += head.a_src[r] * src[static_cast<std::size_t>(r)];
                margin = std::min(margin, std::abs(score));
                weights[e] = score > 0.0 ? score : params.attention_slope * score;
            }
            const double top = *std::max_element(weights.begin(), weights.end());
            double norm = 0.0;
            for (double& w : weights) {
                w = std::exp(w - top);
                norm += w;
            }
            std::vector<double> out(static_cast<std::size_t>(k), 0.0);
            for (std::size_t e = 0; e < sources.size(); ++e) {
                const auto& src = transformed[static_cast<std::size_t>(sources[e])];
                for (int r = 0; r < k; ++r) {
                    out[static_cast<std::size_t>(r)] += (weights[e] / norm) *
                                                        src[static_cast<std::size_t>(r)];
                }
            }
            if (params.concat) {
                combined[i].insert(combined[i].end(), out.begin(), out.end());
            } else if (combined[i].empty()) {
                combined[i] = std::move(out);
            } else {
                for (int r = 0; r < k; ++r) {
                    combined[i][static_cast<std::size_t>(r)] += out[static_cast<std::size_t>(r)];
                }
            }
        }
    }
    for (const std::vector<double>& node : combined) {
        for (double x : node) {
            const double pre =
                params.concat ? x : x / static_cast<double>(params.heads.size());
            margin = std::min(margin, std::abs(pre));
        }
    }
    return margin;
}

std::vector<std::vector<double>> gat_hub_scores(const std::vector<Tensor>& node_feats,
                                                const StarGraph& graph,
                                                const GatLayerParams& params) {
    const int k = params.head_dim();
    const int d_in = params.input_dim();

    std::vector<int> sources;
    if (graph.self_loops) sources.push_back(0);
    for (const auto& [src, dst] : graph.edges) {
        if (dst == 0) sources.push_back(src);
    }

    std::vector<std::vector<double>> scores;
    scores.reserve(params.heads.size());
    for (const GatHeadParams& head : params.heads) {
        auto transform = [&](int node) {
            std::vector<double> out(static_cast<std::size_t>(k));
            for (int r = 0; r < k; ++r) {
                double acc = 0.0;
                for (int c = 0; c < d_in; ++c) {
                    acc += head.W[r * d_in + c] * node_feats[static_cast<std::size_t>(node)][c];
                }
                out[static_cast<std::size_t>(r)] = acc;
            }
            return out;
        };
        const std::vector<double> hub = transform(0);
        double dst_score = 0.0;
        for (int r = 0; r < k; ++r) dst_score += head.a_dst[r] * hub[static_cast<std::size_t>(r)];

        std::vector<double> head_scores;
        head_scores.reserve(sources.size());
        for (int src : sources) {
            const std::vector<double> t = src == 0 ? hub : transform(src);
            double score = dst_score;
            for (int r = 0; r < k; ++r) score += head.a_src[r] * t[static_cast<std::size_t>(r)];
            head_scores.push_back(score);
        }
        scores.push_back(std::move(head_scores));
    }
    return scores;
}

Tensor interaction_vector(Tape& tape, const std::vector<Tensor>& hidden_states,
                          const StarGraph& graph, const InteractionParams& params) {
    std::vector<Tensor> z1 = gat_layer(tape, hidden_states, graph, params.layer1);
    std::vector<Tensor> z2 = gat_layer(tape, z1, graph, params.layer2);
    return leaky_relu(tape, linear_forward(tape, z2[0], params.W_proj, params.b_proj), 0.1);
}

namespace {

Tensor uniform_tensor(Rng& rng, std::vector<int> shape, double bound) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (int i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

GatLayerParams make_gat_layer_params(Rng& rng, int d_in, int d_out, int num_heads,
                                     bool concat) {
    if (d_in <= 0 || d_out <= 0 || num_heads <= 0 || (concat && d_out % num_heads != 0)) {
        throw UsageError("make_gat_layer_params: need positive dims with num_heads dividing "
                         "d_out when concatenating (got d_in=" + std::to_string(d_in) +
                         ", d_out=" + std::to_string(d_out) + ", heads=" +
                         std::to_string(num_heads) + ")");
    }
    const int k = concat ? d_out / num_heads : d_out;
    const double wb = 1.0 / std::sqrt(static_cast<double>(d_in));
    const double ab = 1.0 / std::sqrt(static_cast<double>(2 * k));

    GatLayerParams p;
    p.concat = concat;
    p.heads.reserve(static_cast<std::size_t>(num_heads));
    for (int h = 0; h < num_heads; ++h) {
        GatHeadParams head;
        head.W = uniform_tensor(rng, {k, d_in}, wb);
        head.a_dst = uniform_tensor(rng, {k}, ab);
        head.a_src = uniform_tensor(rng, {k}, ab);
        p.heads.push_back(std::move(head));
    }
    return p;
}

InteractionParams make_interaction_params(Rng& rng, int d_in, int d_hidden, int d_g,
                                          int num_heads, bool concat2) {
    InteractionParams p;
    p.layer1 = make_gat_layer_params(rng, d_in, d_hidden, num_heads, true);
    p.layer2 = make_gat_layer_params(rng, d_hidden, d_hidden, num_heads, concat2);
    p.W_proj = uniform_tensor(rng, {d_g, p.layer2.output_dim()},
                              1.0 / std::sqrt(static_cast<double>(p.layer2.output_dim())));
    p.b_proj = Tensor::zeros({d_g}, true);
    return p;
}

}  // namespace xtrack
