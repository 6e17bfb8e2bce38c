#include "flexgrid/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "flexgrid/csv.hpp"
#include "flexgrid/error.hpp"
#include "flexgrid/rng.hpp"

namespace flexgrid::cluster {

using json = nlohmann::json;

FeatureMode parse_feature_mode(const std::string& text) {
    if (text == "standard") return FeatureMode::standard;
    if (text == "polar") return FeatureMode::polar;
    throw ConfigError("unknown clustering mode '" + text + "' (expected standard or polar)");
}

std::string to_string(FeatureMode mode) { return mode == FeatureMode::polar ? "polar" : "standard"; }

std::size_t feature_length(FeatureMode mode) { return mode == FeatureMode::polar ? 2 : kMinutesPerDay; }

FeatureVector feature_standard(const ev::EvProfile& profile) {
    return {profile.user_id, std::vector<double>(profile.avg_profile_kw.begin(), profile.avg_profile_kw.end()),
            FeatureMode::standard};
}

std::array<double, 2> polar_coordinates(const ev::DayCurve& profile_kw) {
    double x1 = 0.0;
    double x2 = 0.0;
    for (int m = 0; m < kMinutesPerDay; ++m) {
        if (profile_kw[m] == 0.0) continue;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / kMinutesPerDay;
        x1 += std::sin(angle) * profile_kw[m];
        x2 += std::cos(angle) * profile_kw[m];
    }
    return {x1, x2};
}

FeatureVector feature_polar(const ev::EvProfile& profile) {
    const auto xy = polar_coordinates(profile.avg_profile_kw);
    return {profile.user_id, {xy[0], xy[1]}, FeatureMode::polar};
}

std::vector<FeatureVector> make_features(std::span<const ev::EvProfile> profiles, FeatureMode mode) {
    std::vector<FeatureVector> out;
    out.reserve(profiles.size());
    for (const auto& p : profiles) out.push_back(mode == FeatureMode::polar ? feature_polar(p) : feature_standard(p));
    return out;
}

double ClusterModel::inertia_root_kw() const { return std::sqrt(inertia_j_kw2); }

std::vector<int> ClusterModel::member_counts() const {
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (const auto& [user, c] : assignments) ++counts[static_cast<std::size_t>(c)];
    return counts;
}

namespace {

// Features copied into one contiguous row-major block in user_id order.
struct PointSet {
    std::vector<std::string> ids;
    std::vector<double> data;
    std::size_t n = 0;
    std::size_t dim = 0;
    FeatureMode mode = FeatureMode::standard;

    const double* row(std::size_t i) const { return data.data() + i * dim; }
};

PointSet canonical_points(std::span<const FeatureVector> features) {
    if (features.empty()) throw DataError("kmeans: no features");
    PointSet ps;
    ps.mode = features.front().mode;
    ps.dim = feature_length(ps.mode);
    ps.n = features.size();
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return features[a].user_id < features[b].user_id; });
    ps.data.reserve(ps.n * ps.dim);
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const FeatureVector& f = features[order[pos]];
        if (f.mode != ps.mode) throw DataError("kmeans: features mix standard and polar modes");
        if (f.values.size() != ps.dim) throw DataError("kmeans: feature '" + f.user_id + "' has wrong length");
        if (pos > 0 && ps.ids.back() == f.user_id) throw DataError("kmeans: duplicate user_id '" + f.user_id + "'");
        for (double v : f.values)
            if (!std::isfinite(v)) throw DataError("kmeans: non-finite feature for '" + f.user_id + "'");
        ps.ids.push_back(f.user_id);
        ps.data.insert(ps.data.end(), f.values.begin(), f.values.end());
    }
    return ps;
}

double sq_dist(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return s;
}

double keyed_uniform(std::uint64_t seed, std::uint64_t round, const std::string& id) {
    CounterRng rng(mix_keys(mix_keys(seed, round), fnv1a64(id)));
    return rng.uniform();
}

// k-means++ with exponential-key weighted sampling: each draw selects the
// point minimising -log(u)/D^2 where u is keyed on (seed, round, user_id).
std::vector<std::vector<double>> plus_plus_centers(const PointSet& ps, int k, std::uint64_t seed) {
    std::vector<std::vector<double>> centers;
    std::vector<double> d2(ps.n, std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(ps.n, false);
    for (int r = 0; r < k; ++r) {
        const bool all_zero = std::none_of(d2.begin(), d2.end(), [](double v) { return v > 0.0; });
        std::size_t best = ps.n;
        double best_key = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < ps.n; ++j) {
            if (chosen[j]) continue;
            double weight = (r == 0 || all_zero) ? 1.0 : d2[j];
            if (!(weight > 0.0)) continue;
            const double key = -std::log(keyed_uniform(seed, static_cast<std::uint64_t>(r), ps.ids[j])) / weight;
            if (key < best_key) {
                best_key = key;
                best = j;
            }
        }
        if (best == ps.n) throw DataError("kmeans: could not seed centers");
        chosen[best] = true;
        centers.emplace_back(ps.row(best), ps.row(best) + ps.dim);
        for (std::size_t j = 0; j < ps.n; ++j)
            d2[j] = std::min(d2[j], sq_dist(ps.row(j), centers.back().data(), ps.dim));
    }
    return centers;
}

ClusterModel lloyd(const PointSet& ps, std::vector<std::vector<double>> centers, const KMeansOptions& opt) {
    const std::size_t k = centers.size();
    const std::size_t dim = ps.dim;
    std::vector<int> label(ps.n, 0);
    std::vector<double> dist(ps.n, 0.0);
    ClusterModel model;
    model.mode = ps.mode;
    model.k = static_cast<int>(k);
    model.seed = opt.seed;

    int it = 0;
    for (it = 1; it <= opt.max_iter; ++it) {
        for (std::size_t j = 0; j < ps.n; ++j) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = sq_dist(ps.row(j), centers[c].data(), dim);
                if (d < best) {
                    best = d;
                    arg = static_cast<int>(c);
                }
            }
            label[j] = arg;
            dist[j] = best;
        }

        // Empty-cluster repair: hand the worst-served point of a multi-member
        // cluster to the empty cluster.
        std::vector<int> count(k, 0);
        for (int l : label) ++count[static_cast<std::size_t>(l)];
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] > 0) continue;
            std::size_t worst = ps.n;
            double worst_d = -1.0;
            for (std::size_t j = 0; j < ps.n; ++j) {
                if (count[static_cast<std::size_t>(label[j])] > 1 && dist[j] > worst_d) {
                    worst_d = dist[j];
                    worst = j;
                }
            }
            if (worst == ps.n) throw DataError("kmeans: cannot repair empty cluster");
            --count[static_cast<std::size_t>(label[worst])];
            label[worst] = static_cast<int>(c);
            dist[worst] = 0.0;
            count[c] = 1;
        }

        std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
        for (std::size_t j = 0; j < ps.n; ++j) {
            auto& acc = next[static_cast<std::size_t>(label[j])];
            const double* x = ps.row(j);
            for (std::size_t d = 0; d < dim; ++d) acc[d] += x[d];
        }
        double movement = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            for (double& v : next[c]) v /= count[c];
            movement = std::max(movement, std::sqrt(sq_dist(next[c].data(), centers[c].data(), dim)));
        }
        centers = std::move(next);

        double j_total = 0.0;
        for (std::size_t j = 0; j < ps.n; ++j)
            j_total += sq_dist(ps.row(j), centers[static_cast<std::size_t>(label[j])].data(), dim);
        model.objective_history.push_back(j_total);
        if (movement < opt.tol) break;
    }
    model.n_iterations = std::min(it, opt.max_iter);
    model.centroids = std::move(centers);
    model.inertia_j_kw2 = model.objective_history.back();
    for (std::size_t j = 0; j < ps.n; ++j) model.assignments.emplace(ps.ids[j], label[j]);
    return model;
}

void check_options(const PointSet& ps, int k, const KMeansOptions& opt) {
    if (k < 1) throw ConfigError("kmeans: k must be >= 1");
    if (static_cast<std::size_t>(k) > ps.n)
        throw ConfigError("kmeans: k = " + std::to_string(k) + " exceeds the number of users (" +
                          std::to_string(ps.n) + ")");
    if (opt.max_iter < 1) throw ConfigError("kmeans: max_iter must be >= 1");
    if (!(opt.tol > 0.0)) throw ConfigError("kmeans: tol must be > 0");
}

}  // namespace

ClusterModel kmeans(std::span<const FeatureVector> features, const KMeansOptions& options) {
    const PointSet ps = canonical_points(features);
    check_options(ps, options.k, options);
    return lloyd(ps, plus_plus_centers(ps, options.k, options.seed), options);
}

ClusterModel kmeans_from_centers(std::span<const FeatureVector> features, std::vector<std::vector<double>> centers,
                                 const KMeansOptions& options) {
    const PointSet ps = canonical_points(features);
    check_options(ps, static_cast<int>(centers.size()), options);
    for (const auto& c : centers)
        if (c.size() != ps.dim) throw DataError("kmeans: starting center has wrong length");
    return lloyd(ps, std::move(centers), options);
}

double objective(std::span<const FeatureVector> features, const std::map<std::string, int>& assignments,
                 const std::vector<std::vector<double>>& centroids) {
    double total = 0.0;
    for (const auto& f : features) {
        const auto it = assignments.find(f.user_id);
        if (it == assignments.end()) throw DataError("objective: unassigned user '" + f.user_id + "'");
        const auto& c = centroids.at(static_cast<std::size_t>(it->second));
        total += sq_dist(f.values.data(), c.data(), f.values.size());
    }
    return total;
}

double silhouette(std::span<const FeatureVector> features, const std::map<std::string, int>& assignments,
                  std::uint64_t seed, std::size_t max_points) {
    std::set<int> labels;
    for (const auto& [user, c] : assignments) labels.insert(c);
    if (labels.size() < 2) throw ConfigError("silhouette: needs at least two clusters");

    std::vector<const FeatureVector*> pts;
    for (const auto& f : features) pts.push_back(&f);
    std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->user_id < b->user_id; });
    if (pts.size() > max_points) {
        std::vector<std::pair<double, const FeatureVector*>> keyed;
        for (auto* p : pts) keyed.emplace_back(keyed_uniform(seed, 0x5117, p->user_id), p);
        std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first < b.first : a.second->user_id < b.second->user_id;
        });
        pts.clear();
        for (std::size_t i = 0; i < max_points; ++i) pts.push_back(keyed[i].second);
    }

    const int n_labels = *labels.rbegin() + 1;
    std::vector<int> label(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto it = assignments.find(pts[i]->user_id);
        if (it == assignments.end()) throw DataError("silhouette: unassigned user '" + pts[i]->user_id + "'");
        label[i] = it->second;
    }
    std::vector<int> size(static_cast<std::size_t>(n_labels), 0);
    for (int l : label) ++size[static_cast<std::size_t>(l)];

    double total = 0.0;
    std::vector<double> sums(static_cast<std::size_t>(n_labels));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            sums[static_cast<std::size_t>(label[j])] +=
                std::sqrt(sq_dist(pts[i]->values.data(), pts[j]->values.data(), pts[i]->values.size()));
        }
        const auto own = static_cast<std::size_t>(label[i]);
        if (size[own] <= 1) continue;  // singleton scores 0
        const double a = sums[own] / (size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sums.size(); ++c)
            if (c != own && size[c] > 0) b = std::min(b, sums[c] / size[c]);
        const double denom = std::max(a, b);
        if (denom > 0.0 && std::isfinite(b)) total += (b - a) / denom;
    }
    return total / static_cast<double>(pts.size());
}

SelectKResult select_k(std::span<const FeatureVector> features, int k_min, int k_max, int seeds_per_k,
                       std::uint64_t seed, int max_iter, double tol) {
    if (k_min > k_max) throw ConfigError("select_k: empty k range");
    if (k_min < 2) throw ConfigError("select_k: k range must start at 2 or above");
    if (static_cast<std::size_t>(k_max) + 1 > features.size())
        throw ConfigError("select_k: k_max = " + std::to_string(k_max) + " must be below the number of users (" +
                          std::to_string(features.size()) + ")");
    if (seeds_per_k < 1) throw ConfigError("select_k: seeds_per_k must be >= 1");

    SelectKResult result;
    for (int k = k_min; k <= k_max; ++k) {
        KMeansOptions opt{k, 0, max_iter, tol};
        ClusterModel best;
        bool have = false;
        for (int s = 0; s < seeds_per_k; ++s) {
            opt.seed = mix_keys(seed, static_cast<std::uint64_t>(k) * 1000003ULL + static_cast<std::uint64_t>(s));
            ClusterModel m = kmeans(features, opt);
            if (!have || m.inertia_j_kw2 < best.inertia_j_kw2) {
                best = std::move(m);
                have = true;
            }
        }
        if (!result.models.empty()) {
            // Warm start: previous best plus its worst-served point as a new center.
            const ClusterModel& prev = result.models.back();
            std::vector<std::vector<double>> centers = prev.centroids;
            double worst = -1.0;
            const FeatureVector* far = nullptr;
            for (const auto& f : features) {
                const auto& c = prev.centroids[static_cast<std::size_t>(prev.assignments.at(f.user_id))];
                const double d = sq_dist(f.values.data(), c.data(), c.size());
                if (d > worst || (d == worst && f.user_id < far->user_id)) {
                    worst = d;
                    far = &f;
                }
            }
            centers.push_back(far->values);
            opt.seed = prev.seed;
            ClusterModel m = kmeans_from_centers(features, std::move(centers), opt);
            if (m.inertia_j_kw2 < best.inertia_j_kw2) best = std::move(m);
        }
        const double sil = silhouette(features, best.assignments, seed);
        result.table.push_back({k, best.inertia_j_kw2, sil});
        result.models.push_back(std::move(best));
    }
    std::size_t arg = 0;
    for (std::size_t i = 1; i < result.table.size(); ++i)
        if (result.table[i].silhouette > result.table[arg].silhouette) arg = i;
    result.k_best = result.table[arg].k;
    return result;
}

ClusterAggregates cluster_aggregates(const ClusterModel& model, const std::map<std::string, ev::EvProfile>& profiles,
                                     const std::map<std::string, double>& per_user_pmax) {
    ClusterAggregates agg;
    agg.clusters.resize(static_cast<std::size_t>(model.k));
    for (const auto& [user, c] : model.assignments) {
        const auto p = profiles.find(user);
        if (p == profiles.end()) throw DataError("cluster_aggregates: missing profile for user '" + user + "'");
        const auto pm = per_user_pmax.find(user);
        if (pm == per_user_pmax.end()) throw DataError("cluster_aggregates: missing p_max for user '" + user + "'");
        ClusterStats& s = agg.clusters.at(static_cast<std::size_t>(c));
        for (int t = 0; t < kMinutesPerDay; ++t) {
            s.centroid_profile_kw[t] += p->second.avg_profile_kw[t];
            s.frac_charging[t] += p->second.frac_charging[t];
        }
        s.p_max_kw += pm->second;
        ++s.member_count;
    }
    for (auto& s : agg.clusters) {
        if (s.member_count == 0) throw DataError("cluster_aggregates: empty cluster");
        const double n = s.member_count;
        for (int t = 0; t < kMinutesPerDay; ++t) {
            s.centroid_profile_kw[t] /= n;
            s.frac_charging[t] = std::clamp(s.frac_charging[t] / n, 0.0, 1.0);
        }
        s.p_max_kw /= n;
    }
    return agg;
}

// ---------------------------------------------------------------------------

namespace {

json curve_json(const ev::DayCurve& c) { return json(std::vector<double>(c.begin(), c.end())); }

ev::DayCurve curve_from(const json& j, const char* what) {
    if (!j.is_array() || j.size() != kMinutesPerDay)
        throw DataError(std::string("cluster document: '") + what + "' must hold 1440 values");
    ev::DayCurve c{};
    for (int t = 0; t < kMinutesPerDay; ++t) c[t] = j[t].get<double>();
    return c;
}

}  // namespace

std::string to_json_text(const ClusterDocument& doc) {
    const ClusterModel& m = doc.model;
    json j;
    j["schema"] = kClusterSchema;
    j["mode"] = to_string(m.mode);
    j["k"] = m.k;
    j["seed"] = m.seed;
    j["day_filter"] = doc.day_filter;
    j["n_iterations"] = m.n_iterations;
    j["inertia_j_kw2"] = m.inertia_j_kw2;
    j["inertia_root_kw"] = m.inertia_root_kw();
    j["centroids"] = m.centroids;
    j["assignments"] = m.assignments;
    json clusters = json::array();
    for (const auto& s : doc.aggregates.clusters) {
        clusters.push_back({{"member_count", s.member_count},
                            {"p_max_kw", s.p_max_kw},
                            {"centroid_profile_kw", curve_json(s.centroid_profile_kw)},
                            {"frac_charging", curve_json(s.frac_charging)}});
    }
    j["aggregates"] = clusters;
    return j.dump(1) + "\n";
}

ClusterDocument cluster_document_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("cluster document: ") + e.what());
    }
    if (!j.is_object() || j.value("schema", "") != kClusterSchema)
        throw ConfigError(std::string("cluster document: schema mismatch, expected ") + kClusterSchema);
    ClusterDocument doc;
    try {
        ClusterModel& m = doc.model;
        m.mode = parse_feature_mode(j.at("mode").get<std::string>());
        m.k = j.at("k").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.n_iterations = j.value("n_iterations", 0);
        m.inertia_j_kw2 = j.at("inertia_j_kw2").get<double>();
        m.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
        m.assignments = j.at("assignments").get<std::map<std::string, int>>();
        doc.day_filter = j.value("day_filter", std::string("weekdays"));
        for (const auto& c : j.at("aggregates")) {
            ClusterStats s;
            s.member_count = c.at("member_count").get<int>();
            s.p_max_kw = c.at("p_max_kw").get<double>();
            s.centroid_profile_kw = curve_from(c.at("centroid_profile_kw"), "centroid_profile_kw");
            s.frac_charging = curve_from(c.at("frac_charging"), "frac_charging");
            doc.aggregates.clusters.push_back(s);
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("cluster document: ") + e.what());
    }
    const auto k = static_cast<std::size_t>(doc.model.k);
    if (doc.model.k < 1 || doc.model.centroids.size() != k || doc.aggregates.clusters.size() != k)
        throw DataError("cluster document: k does not match centroids/aggregates");
    for (const auto& [user, c] : doc.model.assignments)
        if (c < 0 || static_cast<std::size_t>(c) >= k) throw DataError("cluster document: assignment out of range");
    for (const auto& s : doc.aggregates.clusters)
        if (!(s.p_max_kw > 0.0) || s.member_count < 1) throw DataError("cluster document: invalid aggregates");
    return doc;
}

void write_cluster_document(const std::filesystem::path& path, const ClusterDocument& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json_text(doc);
}

ClusterDocument read_cluster_document(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open cluster model " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return cluster_document_from_json_text(ss.str());
}

std::string diagnostics_csv(const std::vector<SelectKRow>& table) {
    std::string out = "k,inertia_j_kw2,silhouette\n";
    for (const auto& r : table)
        out += std::to_string(r.k) + ',' + csv::format_double(r.inertia_j_kw2) + ',' + csv::format_double(r.silhouette) + '\n';
    return out;
}

}  // namespace flexgrid::cluster
