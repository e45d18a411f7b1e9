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
#include "dmanet/autograd.h"

#include <unordered_set>
#include <utility>

namespace dmanet {
namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

Tensor& Node::GradBuffer() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  return grad;
}

Var Var::Parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var Var::Constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

void Var::ZeroGrad() {
  if (node_ && !node_->grad.empty()) node_->grad.Fill(0.0);
}

Var MakeResult(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (!g_grad_enabled) return Var(std::move(node));
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return Var(std::move(node));
  node->requires_grad = true;
  node->backward = std::move(backward);
  node->inputs.reserve(inputs.size());
  for (auto& in : inputs) node->inputs.push_back(in.shared());
  return Var(std::move(node));
}

void Backward(const Var& root) {
  if (!root.requires_grad()) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->GradBuffer().Fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace dmanet
