#include "seqtree/tree.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace seqtree {

Tree::Tree() {
    nodes_.emplace_back();
}

Tree Tree::root_with_rows(std::vector<int> rows) {
    Tree t;
    std::sort(rows.begin(), rows.end());
    t.nodes_[0].rows = std::move(rows);
    return t;
}

int Tree::node_count() const {
    return int(nodes_.size() - free_.size());
}

int Tree::leaf_count() const {
    return int(leaves().size());
}

std::vector<int> Tree::leaves() const {
    return leaves_under(root_);
}

std::vector<int> Tree::leaves_under(int id) const {
    std::vector<int> out;
    std::vector<int> stack{id};
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const Node& nd = node(cur);
        if (nd.is_leaf()) {
            out.push_back(cur);
        } else {
            stack.push_back(nd.right);
            stack.push_back(nd.left);
        }
    }
    return out;
}

int Tree::route_from(int id, std::span<const double> x) const {
    int cur = id;
    while (!node(cur).is_leaf()) {
        const Node& nd = node(cur);
        cur = x[std::size_t(nd.rule.dim)] <= nd.rule.value ? nd.left : nd.right;
    }
    return cur;
}

void Tree::add_row_to_leaf(int leaf, int row) {
    Node& nd = nodes_[std::size_t(leaf)];
    if (!nd.is_leaf()) throw std::invalid_argument("add_row_to_leaf: not a leaf");
    nd.rows.push_back(row);  // appended indices are strictly increasing
}

std::optional<std::pair<double, double>>
Tree::grow_interval(int leaf, int dim, int min_leaf, std::span<const double> pending_x,
                    const DataStore& store) const {
    const Node& nd = node(leaf);
    const int m = int(nd.rows.size()) + 1;
    if (m < 2 * min_leaf) return std::nullopt;
    std::vector<double> coords;
    coords.reserve(std::size_t(m));
    for (int r : nd.rows) coords.push_back(store.x(r)[std::size_t(dim)]);
    coords.push_back(pending_x[std::size_t(dim)]);
    std::sort(coords.begin(), coords.end());
    // Any s in [k-th smallest, (m-k+1)-th smallest) puts at least k points on
    // each side under the x <= s convention; duplicates collapse the interval.
    const double lo = coords[std::size_t(min_leaf - 1)];
    const double hi = coords[std::size_t(m - min_leaf)];
    if (!(lo < hi)) return std::nullopt;
    return std::make_pair(lo, hi);
}

int Tree::new_node() {
    if (!free_.empty()) {
        const int id = free_.back();
        free_.pop_back();
        nodes_[std::size_t(id)] = Node{};
        return id;
    }
    nodes_.emplace_back();
    return int(nodes_.size() - 1);
}

void Tree::apply_grow(int leaf, const SplitRule& rule, const DataStore& store, int min_leaf) {
    if (!is_leaf(leaf)) throw std::invalid_argument("apply_grow: not a leaf");
    std::vector<int> left_rows, right_rows;
    for (int r : node(leaf).rows) {
        if (store.x(r)[std::size_t(rule.dim)] <= rule.value) left_rows.push_back(r);
        else right_rows.push_back(r);
    }
    if (int(left_rows.size()) < min_leaf || int(right_rows.size()) < min_leaf)
        throw std::invalid_argument("apply_grow: split would leave a child below min_leaf");

    const int l = new_node();
    const int r = new_node();
    Node& nd = nodes_[std::size_t(leaf)];
    nodes_[std::size_t(l)] = Node{leaf, nd.depth + 1, -1, -1, {}, std::move(left_rows)};
    nodes_[std::size_t(r)] = Node{leaf, nd.depth + 1, -1, -1, {}, std::move(right_rows)};
    nd.rule = rule;
    nd.left = l;
    nd.right = r;
    nd.rows.clear();
    nd.rows.shrink_to_fit();
}

void Tree::collect_rows(int id, std::vector<int>& out) const {
    for (int leaf : leaves_under(id)) {
        const auto& rows = node(leaf).rows;
        out.insert(out.end(), rows.begin(), rows.end());
    }
}

void Tree::release_subtree(int id) {
    const Node& nd = node(id);
    if (!nd.is_leaf()) {
        release_subtree(nd.left);
        release_subtree(nd.right);
    }
    nodes_[std::size_t(id)] = Node{};
    free_.push_back(id);
}

void Tree::apply_prune(int leaf) {
    const int par = parent(leaf);
    if (par < 0) throw std::invalid_argument("apply_prune: leaf is the root");
    std::vector<int> rows;
    collect_rows(par, rows);
    std::sort(rows.begin(), rows.end());
    Node& pn = nodes_[std::size_t(par)];
    release_subtree(pn.left);
    release_subtree(pn.right);
    pn.left = -1;
    pn.right = -1;
    pn.rule = SplitRule{};
    pn.rows = std::move(rows);
}

double Tree::subtree_log_prior(int id, const TreePrior& prior) const {
    double lp = 0.0;
    std::vector<int> stack{id};
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const Node& nd = node(cur);
        if (nd.is_leaf()) {
            lp += prior.log_p_nosplit(nd.depth);
        } else {
            lp += prior.log_p_split(nd.depth);
            stack.push_back(nd.right);
            stack.push_back(nd.left);
        }
    }
    return lp;
}

double Tree::log_prior(const TreePrior& prior) const {
    return subtree_log_prior(root_, prior);
}

double Tree::local_log_prior_delta(int leaf, MoveKind move, const TreePrior& prior) const {
    if (!is_leaf(leaf)) throw std::invalid_argument("local_log_prior_delta: not a leaf");
    const int par = parent(leaf);
    const int scope = par < 0 ? leaf : par;
    switch (move) {
        case MoveKind::stay:
            return subtree_log_prior(scope, prior);
        case MoveKind::prune:
            if (par < 0) throw std::invalid_argument("local_log_prior_delta: prune at root");
            return prior.log_p_nosplit(depth(par));
        case MoveKind::grow: {
            const int d = depth(leaf);
            return subtree_log_prior(scope, prior) - prior.log_p_nosplit(d)
                 + prior.log_p_split(d) + 2.0 * prior.log_p_nosplit(d + 1);
        }
    }
    throw std::invalid_argument("local_log_prior_delta: unknown move");
}

namespace {
void render(const Tree& tree, int id, int indent, std::ostringstream& out) {
    const auto& nd = tree.node(id);
    for (int i = 0; i < indent; ++i) out << "  ";
    if (nd.is_leaf()) {
        out << "leaf d" << nd.depth << " n=" << nd.rows.size() << "\n";
    } else {
        out << "split d" << nd.depth << " [x" << nd.rule.dim << " <= " << nd.rule.value << "]\n";
        render(tree, nd.left, indent + 1, out);
        render(tree, nd.right, indent + 1, out);
    }
}

bool equal_subtrees(const Tree& a, int ia, const Tree& b, int ib) {
    const auto& na = a.node(ia);
    const auto& nb = b.node(ib);
    if (na.is_leaf() != nb.is_leaf() || na.depth != nb.depth) return false;
    if (na.is_leaf()) return na.rows == nb.rows;
    if (na.rule.dim != nb.rule.dim || na.rule.value != nb.rule.value) return false;
    return equal_subtrees(a, na.left, b, nb.left) && equal_subtrees(a, na.right, b, nb.right);
}
}  // namespace

std::string Tree::debug_string() const {
    std::ostringstream out;
    render(*this, root_, 0, out);
    return out.str();
}

bool Tree::structurally_equal(const Tree& other) const {
    return equal_subtrees(*this, root_, other, other.root_);
}

}  // namespace seqtree
