/* Copyright 2026 The DMA-Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef DMANET_AUTOGRAD_H_
#define DMANET_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <vector>

#include "dmanet/tensor.h"

namespace dmanet {

// One value in the computation graph. `backward` reads `grad` and accumulates
// into the grads of `inputs`.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Lazily allocated gradient buffer with the value's shape.
  Tensor& GradBuffer();
};

// Shared handle to a graph node. Copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  // A trainable leaf.
  static Var Parameter(Tensor value);
  // A leaf that never receives gradients.
  static Var Constant(Tensor value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  // Empty tensor when no gradient has reached this node yet.
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->GradBuffer(); }
  void ZeroGrad();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds a result node. The backward closure is attached only when gradient
// recording is enabled and some input requires a gradient.
Var MakeResult(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Reverse-mode sweep from `root`, seeding its gradient with ones.
void Backward(const Var& root);

bool GradEnabled();

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace dmanet

#endif  // DMANET_AUTOGRAD_H_
