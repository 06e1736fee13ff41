#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace decotr {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
  std::optional<std::size_t> node_id;
  std::uint64_t tape_generation = 0;
};

using ImplPtr = std::shared_ptr<TensorImpl>;

}  // namespace detail

/// Dense row-major array of doubles with optional gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same storage. Results of
/// operations are never modified after construction; only leaf tensors
/// (parameters) may be updated in place through mutable_data().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable storage of a leaf. Throws ContractError for tensors produced by an operation.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  /// Accumulated gradient; all zeros when nothing has flowed back yet.
  std::vector<double> grad() const;
  void zero_grad();

  /// Node index on the current thread's tape, if this tensor was recorded there.
  std::optional<std::size_t> node_id() const;
  bool is_leaf() const;

  /// Same values, no tape linkage, requires_grad false. Shares no storage.
  Tensor detach() const;

  const detail::ImplPtr& impl() const { return impl_; }
  explicit Tensor(detail::ImplPtr impl) : impl_(std::move(impl)) {}

 private:
  detail::ImplPtr impl_;
};

/// Define-by-run record of differentiable operations for the current thread.
///
/// Operations append a node when gradient recording is enabled and at least
/// one input requires a gradient. Inputs are always recorded before the
/// operations that consume them, so the node list is topologically ordered.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> grad_output)>;

  struct Node {
    std::string kind;
    std::vector<std::optional<std::size_t>> input_ids;  // nullopt for leaves
    detail::ImplPtr output;
    BackwardFn backward;
  };

  static Tape& current();

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::uint64_t generation() const { return generation_; }

  /// Drops every node. Tensors recorded earlier become detached from the tape.
  void clear();

  std::size_t record(std::string kind, const std::vector<detail::ImplPtr>& inputs,
                     const detail::ImplPtr& output, BackwardFn backward);

  /// Reverse accumulation from a scalar loss; consumes the tape.
  void backward(const Tensor& loss);

  bool on_tape(const detail::TensorImpl& impl) const;

 private:
  std::vector<Node> nodes_;
  std::uint64_t generation_ = 1;
};

void backward(const Tensor& loss);

bool grad_enabled();

/// Disables recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Collects a hash of the sign pattern seen at every non-differentiable point
/// (ReLU and |x| inputs, max selections) and of every discrete choice made
/// from data (neighbour tables, sampled subsets) while the probe is alive.
/// Two evaluations with equal signatures lie on the same smooth piece.
class KinkProbe {
 public:
  KinkProbe();
  ~KinkProbe();
  KinkProbe(const KinkProbe&) = delete;
  KinkProbe& operator=(const KinkProbe&) = delete;

  std::uint64_t signature() const;

 private:
  bool previous_active_;
  std::uint64_t previous_signature_;
};

namespace detail {

bool kink_probe_active();
void kink_probe_mix(std::span<const double> inputs);
void kink_probe_mix_indices(std::span<const std::size_t> indices);

/// Lazily allocated gradient buffer; empty span if `impl` does not need a gradient.
std::span<double> grad_sink(TensorImpl& impl);

/// Builds an operation result and records it on the tape when needed.
Tensor make_result(const char* kind, Shape shape, std::vector<double> data,
                   const std::vector<Tensor>& inputs, Tape::BackwardFn backward);

}  // namespace detail

namespace debug {

/// Test hook: perturbs the backward rule of every operation named `kind` so
/// that gradient checks can be shown to catch a broken rule. Empty disables.
void corrupt_backward(std::string kind);

}  // namespace debug

}  // namespace decotr
