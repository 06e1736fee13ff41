#include "decotr/tensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "decotr/errors.hpp"

namespace decotr {
namespace {

thread_local bool g_grad_enabled = true;
thread_local bool g_kink_active = false;
thread_local std::uint64_t g_kink_signature = 0;

std::string& corrupted_kind() {
  static std::string kind;
  return kind;
}

std::uint64_t mix64(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (data.size() != shape_numel(shape)) {
    throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_string(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw IndexError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!impl_) throw ContractError("use of undefined tensor");
  if (!is_leaf()) throw ContractError("only leaf tensors may be modified in place");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  impl_->requires_grad = value;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  if (impl_->grad.empty()) return std::vector<double>(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

std::optional<std::size_t> Tensor::node_id() const {
  if (!impl_ || !Tape::current().on_tape(*impl_)) return std::nullopt;
  return impl_->node_id;
}

bool Tensor::is_leaf() const { return impl_ && !impl_->node_id.has_value(); }

Tensor Tensor::detach() const { return from_data(shape(), impl_->data, false); }

Tape& Tape::current() {
  thread_local Tape tape;
  return tape;
}

void Tape::clear() {
  for (Node& n : nodes_) n.output->node_id.reset();
  nodes_.clear();
  ++generation_;
}

bool Tape::on_tape(const detail::TensorImpl& impl) const {
  return impl.node_id.has_value() && impl.tape_generation == generation_ && *impl.node_id < nodes_.size();
}

std::size_t Tape::record(std::string kind, const std::vector<detail::ImplPtr>& inputs,
                         const detail::ImplPtr& output, BackwardFn backward) {
  Node node;
  node.input_ids.reserve(inputs.size());
  for (const auto& in : inputs) {
    node.input_ids.push_back(on_tape(*in) ? in->node_id : std::nullopt);
  }
  if (!corrupted_kind().empty() && kind == corrupted_kind()) {
    backward = [inner = std::move(backward)](std::span<const double> g) {
      std::vector<double> scaled(g.begin(), g.end());
      for (double& v : scaled) v *= 1.01;
      inner(scaled);
    };
  }
  node.kind = std::move(kind);
  node.output = output;
  node.backward = std::move(backward);
  const std::size_t id = nodes_.size();
  output->node_id = id;
  output->tape_generation = generation_;
  nodes_.push_back(std::move(node));
  return id;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss");
  }
  const detail::TensorImpl& loss_impl = *loss.impl();
  if (!on_tape(loss_impl)) throw ContractError("backward: loss is not recorded on the current tape");
  const std::size_t start = *loss_impl.node_id;
  nodes_[start].output->grad.assign(1, 1.0);
  for (std::size_t i = start + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.output->grad.empty()) continue;
    n.backward(n.output->grad);
  }
  clear();
}

void backward(const Tensor& loss) { Tape::current().backward(loss); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

KinkProbe::KinkProbe() : previous_active_(g_kink_active), previous_signature_(g_kink_signature) {
  g_kink_active = true;
  g_kink_signature = 0xcbf29ce484222325ULL;
}

KinkProbe::~KinkProbe() {
  g_kink_active = previous_active_;
  g_kink_signature = previous_signature_;
}

std::uint64_t KinkProbe::signature() const { return g_kink_signature; }

namespace detail {

bool kink_probe_active() { return g_kink_active; }

void kink_probe_mix(std::span<const double> inputs) {
  std::uint64_t h = g_kink_signature;
  for (double x : inputs) h = mix64(h, x > 0.0 ? 2u : (x < 0.0 ? 0u : 1u));
  g_kink_signature = h;
}

void kink_probe_mix_indices(std::span<const std::size_t> indices) {
  std::uint64_t h = g_kink_signature;
  for (std::size_t i : indices) h = mix64(h, i);
  g_kink_signature = h;
}

std::span<double> grad_sink(TensorImpl& impl) {
  if (!impl.requires_grad) return {};
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}

Tensor make_result(const char* kind, Shape shape, std::vector<double> data,
                   const std::vector<Tensor>& inputs, Tape::BackwardFn backward) {
  const bool needs_grad =
      g_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  Tensor out = Tensor::from_data(std::move(shape), std::move(data), false);
  if (needs_grad) {
    out.impl()->requires_grad = true;
    std::vector<ImplPtr> impls;
    impls.reserve(inputs.size());
    for (const Tensor& t : inputs) impls.push_back(t.impl());
    Tape::current().record(kind, impls, out.impl(), std::move(backward));
  }
  return out;
}

}  // namespace detail

namespace debug {

void corrupt_backward(std::string kind) { corrupted_kind() = std::move(kind); }

}  // namespace debug

}  // namespace decotr
