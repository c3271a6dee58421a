// Vehicle-interaction modeling over a star graph: the target sits at node 0
// and aggregates messages from its neighbor slots through two multi-head
// graph-attention layers, followed by a linear projection of node 0.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xtrack/rng.hpp"
#include "xtrack/tensor.hpp"

namespace xtrack {

struct StarGraph {
    int node_count = 0;
    std::vector<std::pair<int, int>> edges;  // directed (src, dst)
    bool self_loops = true;

    std::string to_string() const;
};

// Node 0 is the target; nodes 1..N are the fixed neighbor slots. Edges run
// j -> 0 for every neighbor; self loops are implicit via the flag.
StarGraph build_star_graph(int num_neighbors);

// One attention head: a k x d_in transform plus the attention vector,
// stored as its destination/source halves (score uses a^T [W h_i || W h_j]).
struct GatHeadParams {
    Tensor W;             // [k, d_in]
    Tensor a_dst, a_src;  // [k] each
};

struct GatLayerParams {
    std::vector<GatHeadParams> heads;
    double attention_slope = 0.2;  // LeakyReLU inside the scoring function
    double output_slope = 0.1;     // LeakyReLU on the combined layer output
    bool concat = true;            // concatenate heads; otherwise average

    int input_dim() const { return heads.at(0).W.shape()[1]; }
    int head_dim() const { return heads.at(0).W.shape()[0]; }
    int output_dim() const {
        return concat ? head_dim() * static_cast<int>(heads.size()) : head_dim();
    }
    std::vector<Tensor> parameters() const;
};

// Per-head attention over node 0's in-edges, in the order self loop first
// (when enabled) then the graph's edge list order.
struct GatAttention {
    std::vector<Tensor> per_head;
};

// Transforms every node, scores node-0's in-edges per head with
// LeakyReLU(a_dst . W h_dst + a_src . W h_src), softmax-normalizes, and
// aggregates. Every node attends over its own in-edges (non-hub nodes
// normally see just their self loop); a node with no in-edge yields zeros.
// Heads are concatenated or averaged, then passed through LeakyReLU.
std::vector<Tensor> gat_layer(Tape& tape, const std::vector<Tensor>& node_feats,
                              const StarGraph& graph, const GatLayerParams& params,
                              GatAttention* hub_attention = nullptr);

struct InteractionParams {
    GatLayerParams layer1, layer2;
    Tensor W_proj, b_proj;  // [d_g, layer2 out], [d_g]

    std::vector<Tensor> parameters() const;
};

// g_T = LeakyReLU(W_proj . node0(layer2(layer1(h))) + b_proj, 0.1).
Tensor interaction_vector(Tape& tape, const std::vector<Tensor>& hidden_states,
                          const StarGraph& graph, const InteractionParams& params);

// Smallest |preactivation| across the layer's two LeakyReLU stages (attention
// scores and combined node outputs) for the given inputs. Zero means some
// nonlinearity sits exactly at its switching point, where the one-sided
// derivatives differ. Nodes without in-edges produce constant zeros and are
// not counted.
double gat_kink_margin(const std::vector<Tensor>& node_feats, const StarGraph& graph,
                       const GatLayerParams& params);

// Raw attention scores over node 0's in-edges, one vector per head, taken
// before the scoring LeakyReLU. Self loop first when enabled, then edge list
// order. When all of a head's scores share one sign the destination half of
// its attention vector shifts every softmax input uniformly and drops out of
// the gradient.
std::vector<std::vector<double>> gat_hub_scores(const std::vector<Tensor>& node_feats,
                                                const StarGraph& graph,
                                                const GatLayerParams& params);

GatLayerParams make_gat_layer_params(Rng& rng, int d_in, int d_out, int num_heads,
                                     bool concat);
InteractionParams make_interaction_params(Rng& rng, int d_in, int d_hidden, int d_g,
                                          int num_heads, bool concat2);

}  // namespace xtrack
