#include "seqtree/checkpoint.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace seqtree {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "seqtree-cloud-v1";

const char* model_name(LeafModel m) {
    switch (m) {
        case LeafModel::constant: return "constant";
        case LeafModel::linear: return "linear";
        case LeafModel::multinomial: return "multinomial";
    }
    return "constant";
}

LeafModel model_from_name(const std::string& s) {
    if (s == "constant") return LeafModel::constant;
    if (s == "linear") return LeafModel::linear;
    if (s == "multinomial") return LeafModel::multinomial;
    throw std::runtime_error("checkpoint: unknown leaf model '" + s + "'");
}

json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[Eigen::Index(i)] = a[i].get<double>();
    return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        a.push_back(std::move(row));
    }
    return a;
}

Eigen::MatrixXd mat_from_json(const json& a) {
    const Eigen::Index rows = Eigen::Index(a.size());
    const Eigen::Index cols = rows > 0 ? Eigen::Index(a[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = a[std::size_t(r)][std::size_t(c)].get<double>();
    return m;
}

json stats_to_json(const LeafStats& stats) {
    json j;
    if (const auto* c = std::get_if<ConstantStats>(&stats)) {
        j["n"] = c->n;
        j["sum_y"] = c->sum_y;
        j["sum_y2"] = c->sum_y2;
    } else if (const auto* l = std::get_if<LinearStats>(&stats)) {
        j["n"] = l->n;
        j["dim"] = l->dim;
        j["sum_y"] = l->sum_y;
        j["sum_y2"] = l->sum_y2;
        j["sum_x"] = vec_to_json(l->sum_x);
        j["sum_xy"] = vec_to_json(l->sum_xy);
        j["gram"] = mat_to_json(l->gram);
        j["gram_inv"] = mat_to_json(l->gram_inv);
        j["log_det_gram"] = l->log_det_gram;
        j["gram_ok"] = l->gram_ok;
    } else {
        j["counts"] = std::get<MultinomialStats>(stats).counts;
    }
    return j;
}

LeafStats stats_from_json(const json& j, LeafModel model) {
    switch (model) {
        case LeafModel::constant: {
            ConstantStats s;
            s.n = j.at("n").get<long long>();
            s.sum_y = j.at("sum_y").get<double>();
            s.sum_y2 = j.at("sum_y2").get<double>();
            return s;
        }
        case LeafModel::linear: {
            LinearStats s(j.at("dim").get<int>());
            s.n = j.at("n").get<long long>();
            s.sum_y = j.at("sum_y").get<double>();
            s.sum_y2 = j.at("sum_y2").get<double>();
            s.sum_x = vec_from_json(j.at("sum_x"));
            s.sum_xy = vec_from_json(j.at("sum_xy"));
            s.gram = mat_from_json(j.at("gram"));
            s.gram_inv = mat_from_json(j.at("gram_inv"));
            s.log_det_gram = j.at("log_det_gram").get<double>();
            s.gram_ok = j.at("gram_ok").get<bool>();
            return s;
        }
        case LeafModel::multinomial: {
            MultinomialStats s;
            s.counts = j.at("counts").get<std::vector<long long>>();
            return s;
        }
    }
    throw std::runtime_error("checkpoint: bad leaf model");
}

json particle_to_json(const Particle& p) {
    // Nodes are emitted in depth-first preorder and renumbered 0..k-1, so the
    // serialized form does not depend on arena slot history: semantically
    // equal clouds serialize to identical bytes.
    const Tree& tree = p.tree;
    std::vector<int> order;
    std::vector<int> stack{tree.root()};
    std::map<int, int> renumber;
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        renumber[id] = int(order.size());
        order.push_back(id);
        const auto& nd = tree.node(id);
        if (!nd.is_leaf()) {
            stack.push_back(nd.right);
            stack.push_back(nd.left);
        }
    }
    json nodes = json::array();
    for (int id : order) {
        const auto& nd = tree.node(id);
        json n;
        n["id"] = renumber.at(id);
        if (nd.is_leaf()) {
            n["rows"] = nd.rows;
        } else {
            n["dim"] = nd.rule.dim;
            n["value"] = nd.rule.value;
            n["left"] = renumber.at(nd.left);
            n["right"] = renumber.at(nd.right);
        }
        nodes.push_back(std::move(n));
    }
    json tj;
    tj["root"] = 0;
    tj["nodes"] = std::move(nodes);

    json stats = json::object();
    for (const auto& [leaf, s] : p.leaf_stats)
        stats[std::to_string(renumber.at(leaf))] = stats_to_json(s);

    json pj;
    pj["tree"] = std::move(tj);
    pj["stats"] = std::move(stats);
    return pj;
}

// Rebuilds a tree by replaying grows in serialized DFS order, then remaps
// leaf ids for the stats map.
struct RestoredTree {
    Tree tree;
    std::map<int, int> id_map;  // serialized id -> arena id
};

RestoredTree tree_from_json(const json& j, const DataStore& store) {
    struct SerNode {
        bool leaf = true;
        SplitRule rule;
        int left = -1, right = -1;
        std::vector<int> rows;
    };
    std::map<int, SerNode> ser;
    for (const auto& n : j.at("nodes")) {
        SerNode sn;
        if (n.contains("rows")) {
            sn.rows = n.at("rows").get<std::vector<int>>();
        } else {
            sn.leaf = false;
            sn.rule = {n.at("dim").get<int>(), n.at("value").get<double>()};
            sn.left = n.at("left").get<int>();
            sn.right = n.at("right").get<int>();
        }
        ser[n.at("id").get<int>()] = std::move(sn);
    }

    const int root_id = j.at("root").get<int>();
    std::vector<int> rows;
    std::vector<int> stack{root_id};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        const auto& sn = ser.at(id);
        if (sn.leaf) rows.insert(rows.end(), sn.rows.begin(), sn.rows.end());
        else { stack.push_back(sn.right); stack.push_back(sn.left); }
    }

    RestoredTree out;
    out.tree = Tree::root_with_rows(rows);
    // Replay splits: walk serialized structure and grow the arena in step.
    std::vector<std::pair<int, int>> frontier{{root_id, out.tree.root()}};
    while (!frontier.empty()) {
        auto [sid, aid] = frontier.back();
        frontier.pop_back();
        const auto& sn = ser.at(sid);
        if (sn.leaf) {
            out.id_map[sid] = aid;
            continue;
        }
        out.tree.apply_grow(aid, sn.rule, store, 0);
        const auto& nd = out.tree.node(aid);
        frontier.push_back({sn.right, nd.right});
        frontier.push_back({sn.left, nd.left});
    }
    return out;
}

}  // namespace

std::string cloud_to_json(const Cloud& cloud) {
    const CloudConfig& cfg = cloud.config();
    const DataStore& store = cloud.store();
    json j;
    j["format"] = kFormat;
    j["model"] = model_name(cfg.model);
    j["particles"] = cfg.particles;
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
    j["t0"] = cloud.t0();
    j["seed"] = cfg.seed;
    j["freeze_structure"] = cfg.freeze_structure;
    j["t"] = cloud.time();
    j["log_ml"] = cloud.log_marginal_estimate();

    json st;
    st["dim"] = store.dim();
    st["kind"] = store.response_kind() == ResponseKind::real ? "real" : "class";
    st["classes"] = store.num_classes();
    json xs = json::array(), ys = json::array();
    for (int r = 0; r < store.size(); ++r) {
        const auto x = store.x(r);
        json row = json::array();
        for (double v : x) row.push_back(v);
        xs.push_back(std::move(row));
        if (store.response_kind() == ResponseKind::real) ys.push_back(store.y(r));
        else ys.push_back(store.label(r));
    }
    st["x"] = std::move(xs);
    st["y"] = std::move(ys);
    j["store"] = std::move(st);

    json parts = json::array();
    for (const auto& p : cloud.particles()) parts.push_back(particle_to_json(p));
    j["particle_states"] = std::move(parts);
    return j.dump();
}

Cloud cloud_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kFormat)
        throw std::runtime_error("checkpoint: unsupported format");

    CloudConfig cfg;
    cfg.model = model_from_name(j.at("model").get<std::string>());
    cfg.particles = j.at("particles").get<int>();
    cfg.alpha = j.at("alpha").get<double>();
    cfg.beta = j.at("beta").get<double>();
    cfg.t0 = j.at("t0").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.freeze_structure = j.at("freeze_structure").get<bool>();

    const json& st = j.at("store");
    const int dim = st.at("dim").get<int>();
    const bool is_class = st.at("kind").get<std::string>() == "class";
    DataStore store = is_class ? DataStore(dim, st.at("classes").get<int>()) : DataStore(dim);
    const json& xs = st.at("x");
    const json& ys = st.at("y");
    std::vector<double> x(std::size_t(dim), 0.0);
    for (std::size_t r = 0; r < xs.size(); ++r) {
        for (int c = 0; c < dim; ++c) x[std::size_t(c)] = xs[r][std::size_t(c)].get<double>();
        if (is_class) store.append(x, Response::category(ys[r].get<int>()));
        else store.append(x, Response::real(ys[r].get<double>()));
    }

    std::vector<Particle> particles;
    for (const auto& pj : j.at("particle_states")) {
        RestoredTree rt = tree_from_json(pj.at("tree"), store);
        Particle p;
        p.tree = std::move(rt.tree);
        for (const auto& [key, sj] : pj.at("stats").items()) {
            const int ser_id = std::stoi(key);
            p.leaf_stats[rt.id_map.at(ser_id)] = stats_from_json(sj, cfg.model);
        }
        particles.push_back(std::move(p));
    }

    return Cloud::restore(cfg, std::move(store), std::move(particles),
                          j.at("t").get<int>(), j.at("log_ml").get<double>());
}

void save_cloud(const Cloud& cloud, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << cloud_to_json(cloud);
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Cloud load_cloud(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return cloud_from_json(text);
}

}  // namespace seqtree
