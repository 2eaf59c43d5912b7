#pragma once

#include "seqtree/data.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace seqtree {

// Axis-aligned split.  Routing convention, fixed globally: x[dim] <= value
// goes to the left child, otherwise right.
struct SplitRule {
    int dim = 0;
    double value = 0.0;
};

// Depth-decaying split prior p_split(depth) = alpha * (1 + depth)^(-beta).
struct TreePrior {
    double alpha = 0.95;
    double beta = 2.0;
    int min_leaf = 3;

    double p_split(int depth) const {
        return alpha * std::pow(1.0 + double(depth), -beta);
    }
    double log_p_split(int depth) const { return std::log(p_split(depth)); }
    double log_p_nosplit(int depth) const { return std::log1p(-p_split(depth)); }
};

enum class MoveKind { stay, prune, grow };

// Binary recursive partition over rows of a DataStore.  Nodes live in an
// index arena with explicit parent links; pruned slots are recycled through a
// free list.  Leaf nodes own their row-index sets (kept sorted).
class Tree {
public:
    struct Node {
        int parent = -1;
        int depth = 0;
        int left = -1;   // -1 for leaves
        int right = -1;
        SplitRule rule;  // meaningful only for internal nodes
        std::vector<int> rows;  // meaningful only for leaves

        bool is_leaf() const { return left < 0; }
    };

    Tree();
    static Tree root_with_rows(std::vector<int> rows);

    int root() const { return root_; }
    const Node& node(int id) const { return nodes_[std::size_t(id)]; }
    bool is_leaf(int id) const { return node(id).is_leaf(); }
    int parent(int id) const { return node(id).parent; }
    int depth(int id) const { return node(id).depth; }

    // Live nodes (the arena may hold recycled slots).
    int node_count() const;
    int leaf_count() const;
    std::vector<int> leaves() const;
    std::vector<int> leaves_under(int id) const;

    // Walks the split rules from the root down to the unique leaf containing x.
    int route(std::span<const double> x) const { return route_from(root_, x); }
    int route_from(int id, std::span<const double> x) const;

    void add_row_to_leaf(int leaf, int row);

    // Largest half-open interval [lo, hi) of split values on `dim` such that
    // both prospective children of `leaf` keep at least min_leaf of the rows
    // in leaf + pending_x.  Empty result means the dimension is ineligible.
    std::optional<std::pair<double, double>>
    grow_interval(int leaf, int dim, int min_leaf, std::span<const double> pending_x,
                  const DataStore& store) const;

    // Turns `leaf` into an internal node with two fresh leaves, partitioning
    // its rows per the routing convention.  Throws if a child would fall
    // below min_leaf.
    void apply_grow(int leaf, const SplitRule& rule, const DataStore& store, int min_leaf);

    // Collapses the parent of `leaf` into a leaf holding every row below it,
    // removing the sibling subtree.  Throws if `leaf` is the root.
    void apply_prune(int leaf);

    // Sum of Eq.-style log prior terms over the whole tree: internal nodes
    // have split and leaves have not (split-location factors are uniform and
    // common to all candidates, so they are omitted throughout).
    double log_prior(const TreePrior& prior) const;
    double subtree_log_prior(int id, const TreePrior& prior) const;

    // Log prior of the subtree rooted at parent(leaf) -- or at the leaf
    // itself when it is the root -- under each local move candidate.
    // Differences across moves equal full-tree log prior differences.
    double local_log_prior_delta(int leaf, MoveKind move, const TreePrior& prior) const;

    // Nested plain-text rendering for debugging and golden tests.
    std::string debug_string() const;

    bool structurally_equal(const Tree& other) const;

private:
    int new_node();
    void release_subtree(int id);
    void collect_rows(int id, std::vector<int>& out) const;

    std::vector<Node> nodes_;
    std::vector<int> free_;
    int root_ = 0;
};

}  // namespace seqtree
