#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "fsd/errors.hpp"
#include "fsd/geo.hpp"

namespace fsd::geo {

/// In-memory R-tree over degree-space rectangles (Guttman, quadratic split).
/// Insert and window query only; callers that need deletion keep their own
/// authoritative map and rebuild (see the candidate index). Rectangles must
/// not wrap in longitude; split wrapping regions before inserting.
template <typename T>
class RTree {
 public:
  explicit RTree(std::size_t node_capacity = 16)
      : capacity_(node_capacity < 4 ? 4 : node_capacity),
        min_fill_(capacity_ * 2 / 5 > 1 ? capacity_ * 2 / 5 : 1),
        root_(std::make_unique<Node>(true)) {}

  std::size_t size() const { return size_; }

  void clear() {
    root_ = std::make_unique<Node>(true);
    size_ = 0;
  }

  void insert(const LatLonRect& rect, T value) {
    Node* leaf = choose_leaf(root_.get(), rect);
    leaf->rects.push_back(rect);
    leaf->values.push_back(std::move(value));
    adjust_upward(leaf, rect);
    if (leaf->rects.size() > capacity_) split_and_propagate(leaf);
    ++size_;
  }

  /// Visits every stored (rect, value) whose rect intersects the window.
  template <typename Fn>
  void query(const LatLonRect& window, Fn&& visit) const {
    query_node(root_.get(), window, visit);
  }

  /// Visits everything in storage order.
  template <typename Fn>
  void for_each(Fn&& visit) const {
    query_node(root_.get(),
               LatLonRect{-90.0, 90.0, -180.0, 180.0}, visit);
  }

 private:
  struct Node {
    explicit Node(bool is_leaf) : leaf(is_leaf) {}
    bool leaf;
    Node* parent = nullptr;
    std::vector<LatLonRect> rects;                 // entry or child MBRs
    std::vector<T> values;                         // leaf only
    std::vector<std::unique_ptr<Node>> children;   // internal only
  };

  static LatLonRect mbr_of(const Node& n) {
    LatLonRect r = n.rects.front();
    for (std::size_t i = 1; i < n.rects.size(); ++i)
      r = r.united(n.rects[i]);
    return r;
  }

  Node* choose_leaf(Node* node, const LatLonRect& rect) const {
    while (!node->leaf) {
      std::size_t best = 0;
      double best_enlargement = std::numeric_limits<double>::infinity();
      double best_area = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < node->rects.size(); ++i) {
        const double grow = node->rects[i].enlargement(rect);
        const double area = node->rects[i].area();
        if (grow < best_enlargement ||
            (grow == best_enlargement && area < best_area)) {
          best = i;
          best_enlargement = grow;
          best_area = area;
        }
      }
      node = node->children[best].get();
    }
    return node;
  }

  /// Widens ancestor MBRs to cover the new entry.
  void adjust_upward(Node* node, const LatLonRect& rect) {
    Node* child = node;
    Node* parent = node->parent;
    while (parent) {
      const std::size_t slot = slot_of(parent, child);
      parent->rects[slot] = parent->rects[slot].united(rect);
      child = parent;
      parent = parent->parent;
    }
  }

  static std::size_t slot_of(Node* parent, Node* child) {
    for (std::size_t i = 0; i < parent->children.size(); ++i)
      if (parent->children[i].get() == child) return i;
    raise(Errc::InvalidArgument, "rtree parent/child link broken");
  }

  // Quadratic PickSeeds: the pair wasting the most area together.
  static std::pair<std::size_t, std::size_t> pick_seeds(
      const std::vector<LatLonRect>& rects) {
    std::pair<std::size_t, std::size_t> seeds{0, 1};
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < rects.size(); ++i) {
      for (std::size_t j = i + 1; j < rects.size(); ++j) {
        const double waste = rects[i].united(rects[j]).area() -
                             rects[i].area() - rects[j].area();
        if (waste > worst) {
          worst = waste;
          seeds = {i, j};
        }
      }
    }
    return seeds;
  }

  struct SplitPlan {
    std::vector<std::size_t> left, right;
  };

  SplitPlan quadratic_split(const std::vector<LatLonRect>& rects) const {
    const auto [seed_a, seed_b] = pick_seeds(rects);
    SplitPlan plan;
    plan.left.push_back(seed_a);
    plan.right.push_back(seed_b);
    LatLonRect left_mbr = rects[seed_a];
    LatLonRect right_mbr = rects[seed_b];

    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < rects.size(); ++i)
      if (i != seed_a && i != seed_b) rest.push_back(i);

    while (!rest.empty()) {
      // Force assignment when one side must take all that remain to reach
      // minimum fill.
      if (plan.left.size() + rest.size() == min_fill_) {
        for (std::size_t idx : rest) plan.left.push_back(idx);
        break;
      }
      if (plan.right.size() + rest.size() == min_fill_) {
        for (std::size_t idx : rest) plan.right.push_back(idx);
        break;
      }
      // PickNext: the entry with the strongest preference either way.
      std::size_t pick_pos = 0;
      double best_diff = -1.0;
      double grow_left = 0.0, grow_right = 0.0;
      for (std::size_t pos = 0; pos < rest.size(); ++pos) {
        const double gl = left_mbr.enlargement(rects[rest[pos]]);
        const double gr = right_mbr.enlargement(rects[rest[pos]]);
        const double diff = gl > gr ? gl - gr : gr - gl;
        if (diff > best_diff) {
          best_diff = diff;
          pick_pos = pos;
          grow_left = gl;
          grow_right = gr;
        }
      }
      const std::size_t idx = rest[pick_pos];
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(pick_pos));
      bool to_left;
      if (grow_left != grow_right)
        to_left = grow_left < grow_right;
      else if (left_mbr.area() != right_mbr.area())
        to_left = left_mbr.area() < right_mbr.area();
      else
        to_left = plan.left.size() <= plan.right.size();
      if (to_left) {
        plan.left.push_back(idx);
        left_mbr = left_mbr.united(rects[idx]);
      } else {
        plan.right.push_back(idx);
        right_mbr = right_mbr.united(rects[idx]);
      }
    }
    return plan;
  }

  void split_and_propagate(Node* node) {
    while (node && node->rects.size() > capacity_) {
      const SplitPlan plan = quadratic_split(node->rects);
      auto sibling = std::make_unique<Node>(node->leaf);

      std::vector<LatLonRect> keep_rects;
      std::vector<T> keep_values;
      std::vector<std::unique_ptr<Node>> keep_children;
      for (std::size_t idx : plan.left) {
        keep_rects.push_back(node->rects[idx]);
        if (node->leaf)
          keep_values.push_back(std::move(node->values[idx]));
        else
          keep_children.push_back(std::move(node->children[idx]));
      }
      for (std::size_t idx : plan.right) {
        sibling->rects.push_back(node->rects[idx]);
        if (node->leaf)
          sibling->values.push_back(std::move(node->values[idx]));
        else
          sibling->children.push_back(std::move(node->children[idx]));
      }
      node->rects = std::move(keep_rects);
      node->values = std::move(keep_values);
      node->children = std::move(keep_children);
      for (auto& child : node->children) child->parent = node;
      for (auto& child : sibling->children) child->parent = sibling.get();

      Node* parent = node->parent;
      if (!parent) {
        auto new_root = std::make_unique<Node>(false);
        new_root->rects.push_back(mbr_of(*root_));
        new_root->rects.push_back(mbr_of(*sibling));
        sibling->parent = new_root.get();
        root_->parent = new_root.get();
        new_root->children.push_back(std::move(root_));
        new_root->children.push_back(std::move(sibling));
        root_ = std::move(new_root);
        return;
      }
      const std::size_t slot = slot_of(parent, node);
      parent->rects[slot] = mbr_of(*node);
      sibling->parent = parent;
      parent->rects.push_back(mbr_of(*sibling));
      parent->children.push_back(std::move(sibling));
      node = parent;
    }
  }

  template <typename Fn>
  void query_node(const Node* node, const LatLonRect& window,
                  Fn& visit) const {
    if (node->leaf) {
      for (std::size_t i = 0; i < node->rects.size(); ++i)
        if (node->rects[i].intersects(window))
          visit(node->rects[i], node->values[i]);
      return;
    }
    for (std::size_t i = 0; i < node->rects.size(); ++i)
      if (node->rects[i].intersects(window))
        query_node(node->children[i].get(), window, visit);
  }

  std::size_t capacity_;
  std::size_t min_fill_;
  std::unique_ptr<Node> root_;
  std::size_t size_ = 0;
};

}  // namespace fsd::geo
