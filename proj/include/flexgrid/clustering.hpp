#pragma once

// k-means over per-user charging profiles, either on the raw 1,440-minute
// curve or on its two-dimensional polar summary, plus model selection and the
// per-cluster statistics consumed by the power-flow stage.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flexgrid/ev_data.hpp"

namespace flexgrid::cluster {

enum class FeatureMode { standard, polar };

FeatureMode parse_feature_mode(const std::string& text);
std::string to_string(FeatureMode mode);
std::size_t feature_length(FeatureMode mode);

struct FeatureVector {
    std::string user_id;
    std::vector<double> values;
    FeatureMode mode = FeatureMode::standard;
};

FeatureVector feature_standard(const ev::EvProfile& profile);
FeatureVector feature_polar(const ev::EvProfile& profile);

// (sum_m sin(2 pi m / 1440) P[m], sum_m cos(2 pi m / 1440) P[m]): the minute
// index m is time of day in hours times 60.
std::array<double, 2> polar_coordinates(const ev::DayCurve& profile_kw);

std::vector<FeatureVector> make_features(std::span<const ev::EvProfile> profiles, FeatureMode mode);

struct KMeansOptions {
    int k = 2;
    std::uint64_t seed = 0;
    int max_iter = 300;
    double tol = 1e-6;
};

struct ClusterModel {
    FeatureMode mode = FeatureMode::standard;
    int k = 0;
    std::vector<std::vector<double>> centroids;
    std::map<std::string, int> assignments;
    double inertia_j_kw2 = 0.0;  // sum of squared distances to the assigned centroid
    std::uint64_t seed = 0;
    int n_iterations = 0;
    // Objective after every Lloyd update; non-increasing by construction.
    std::vector<double> objective_history;

    double inertia_root_kw() const;
    std::vector<int> member_counts() const;
};

// Lloyd iterations from a seeded k-means++ start. Features are processed in
// user_id order and seeding keys on user_id hashes, so the result does not
// depend on the input order.
ClusterModel kmeans(std::span<const FeatureVector> features, const KMeansOptions& options);

// Lloyd iterations from explicit starting centers (k = centers.size()).
ClusterModel kmeans_from_centers(std::span<const FeatureVector> features,
                                 std::vector<std::vector<double>> centers, const KMeansOptions& options);

// Objective recomputed from scratch for an assignment and a set of centroids.
double objective(std::span<const FeatureVector> features, const std::map<std::string, int>& assignments,
                 const std::vector<std::vector<double>>& centroids);

// Mean silhouette with Euclidean distance. Singletons score 0, as does 0/0.
// Above `max_points` a seeded, order-independent subsample is scored.
double silhouette(std::span<const FeatureVector> features, const std::map<std::string, int>& assignments,
                  std::uint64_t seed = 0, std::size_t max_points = 2000);

struct SelectKRow {
    int k = 0;
    double inertia_j_kw2 = 0.0;
    double silhouette = 0.0;
};

struct SelectKResult {
    int k_best = 0;
    std::vector<SelectKRow> table;
    std::vector<ClusterModel> models;  // best-of-seeds model per row of `table`
};

// Best-of-seeds k-means for every k in [k_min, k_max]; the winner maximises
// silhouette with ties going to the smaller k. Each k > k_min also tries the
// previous solution plus its worst-served point as a warm start, which keeps
// the inertia column non-increasing.
SelectKResult select_k(std::span<const FeatureVector> features, int k_min, int k_max, int seeds_per_k,
                       std::uint64_t seed, int max_iter = 300, double tol = 1e-6);

struct ClusterStats {
    ev::DayCurve centroid_profile_kw{};
    ev::DayCurve frac_charging{};
    double p_max_kw = 0.0;
    int member_count = 0;
};

struct ClusterAggregates {
    std::vector<ClusterStats> clusters;
};

ClusterAggregates cluster_aggregates(const ClusterModel& model, const std::map<std::string, ev::EvProfile>& profiles,
                                     const std::map<std::string, double>& per_user_pmax);

// ---------------------------------------------------------------------------
// Cluster model document ("flexgrid.cluster.v1")

inline constexpr const char* kClusterSchema = "flexgrid.cluster.v1";

struct ClusterDocument {
    ClusterModel model;
    ClusterAggregates aggregates;
    std::string day_filter = "weekdays";
};

std::string to_json_text(const ClusterDocument& doc);
ClusterDocument cluster_document_from_json_text(const std::string& text);
void write_cluster_document(const std::filesystem::path& path, const ClusterDocument& doc);
ClusterDocument read_cluster_document(const std::filesystem::path& path);

std::string diagnostics_csv(const std::vector<SelectKRow>& table);

}  // namespace flexgrid::cluster
