// Dense tensors and a tape-based reverse-mode differentiation graph.
// The op set is exactly what the classifier backbones and attacks need;
// there is no broadcasting beyond bias addition and no GPU path.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace docadv {

using Shape = std::vector<int>;

int numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Tensor {
    Shape shape;
    std::vector<double> values;  // row-major, size == numel(shape)
    std::optional<int> node_id;  // set once registered in a Graph

    Tensor() = default;
    Tensor(Shape s, std::vector<double> v);

    static Tensor zeros(const Shape& s);
    static Tensor full(const Shape& s, double value);

    int size() const { return static_cast<int>(values.size()); }
    bool all_finite() const;
};

enum class Op {
    Leaf,
    Add,
    Mul,
    Matmul,
    Conv2d,
    Relu,
    AvgPool2d,
    Flatten,
    SoftmaxCrossEntropy,
    ChannelMean,
};

const char* op_name(Op op);

struct OpAttrs {
    int stride = 1;            // conv2d / avgpool2d
    int pad = 0;               // conv2d
    int window_h = 1;          // avgpool2d
    int window_w = 1;
    std::vector<int> labels;   // softmax_crossentropy, one label per batch row
};

// Single-owner computation tape. Nodes are appended by forward() in
// topological order; backward() fills a gradient per node. Tensors that
// never entered a graph are plain immutable values.
class Graph {
  public:
    // Registers an input or parameter tensor and returns it with node_id set.
    Tensor leaf(Tensor t);

    // Runs one op, caches the result for backward, returns it with node_id
    // set. Inputs without a node_id are registered as leaves first.
    Tensor forward(Op op, const std::vector<Tensor>& inputs, OpAttrs attrs = {});

    const Tensor& value(int node_id) const;
    int node_count() const { return static_cast<int>(nodes_.size()); }

    // Reverse pass from a scalar-shaped loss. Every node gets a gradient;
    // nodes the loss does not depend on get zeros.
    const std::vector<Tensor>& backward(int loss_node);

    const std::vector<Tensor>& gradients() const { return gradients_; }

    // Recomputes all node values with one leaf entry overridden; used by the
    // finite-difference oracle. Also reports the sign pattern (-1/0/+1) of
    // every relu input so callers can detect kink crossings.
    struct Replay {
        double loss;
        std::vector<signed char> relu_signs;
    };
    Replay replay(int loss_node, int leaf_node, int flat_index, double value) const;

  private:
    struct Node {
        Op op;
        std::vector<int> inputs;
        OpAttrs attrs;
        Tensor value;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> gradients_;

    Tensor eval(const Node& node, const std::vector<Tensor>& values) const;
};

// Max over entries of |analytic - central difference| / max(1, |analytic|)
// for the tensor registered at tensor_node. Entries whose +-step evaluations
// land on different sides of a relu kink are excluded.
double finite_diff_check(Graph& graph, int loss_node, int tensor_node, double step);

}  // namespace docadv
