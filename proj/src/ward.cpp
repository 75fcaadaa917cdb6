#include <algorithm>
#include <cmath>
#include <limits>

#include "arena/forge.hpp"

namespace arena {

namespace {

struct Cluster {
  std::vector<std::size_t> members;  // original point indices, ascending
  std::vector<double> centroid;
  std::size_t rep = 0;       // member index carrying the smallest label
  std::string label;         // smallest member label
  bool alive = true;
};

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Centroids are always recomputed by summing member points in ascending index
// order. The fixed evaluation order makes costs bit-reproducible, so equal
// costs are exactly equal and the label tie-break is meaningful.
std::vector<double> centroid_of(const std::vector<std::size_t>& members,
                                const std::vector<std::vector<double>>& points) {
  std::vector<double> c(points[members[0]].size(), 0.0);
  for (std::size_t m : members)
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += points[m][k];
  for (double& x : c) x /= static_cast<double>(members.size());
  return c;
}

// Increase in within-cluster sum of squares caused by merging A and B.
double ward_cost(const Cluster& a, const Cluster& b) {
  double na = static_cast<double>(a.members.size());
  double nb = static_cast<double>(b.members.size());
  return na * nb / (na + nb) * sq_dist(a.centroid, b.centroid);
}

}  // namespace

std::vector<WardMerge> ward_linkage(const std::vector<std::vector<double>>& points,
                                    const std::vector<std::string>& labels) {
  if (points.size() != labels.size())
    throw ValueError("ward_linkage: points and labels differ in length");
  const std::size_t n = points.size();
  for (const auto& p : points)
    if (p.size() != points[0].size())
      throw ValueError("ward_linkage: feature vectors differ in length");

  std::vector<Cluster> clusters(n);
  for (std::size_t i = 0; i < n; ++i) {
    clusters[i].members = {i};
    clusters[i].centroid = points[i];
    clusters[i].rep = i;
    clusters[i].label = labels[i];
  }

  std::vector<WardMerge> merges;
  double last_cost = -std::numeric_limits<double>::infinity();
  for (std::size_t round = 1; round < n; ++round) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      if (!clusters[i].alive) continue;
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        if (!clusters[j].alive) continue;
        // Candidate pair ordered by label, so ties compare consistently.
        std::size_t p = i, q = j;
        if (clusters[q].label < clusters[p].label) std::swap(p, q);
        double c = ward_cost(clusters[p], clusters[q]);
        bool better = false;
        if (!found || c < best) {
          better = true;
        } else if (c == best) {
          const Cluster& cp = clusters[p];
          const Cluster& cb = clusters[bi];
          if (cp.label < cb.label ||
              (cp.label == cb.label && clusters[q].label < clusters[bj].label))
            better = true;
        }
        if (better) {
          best = c;
          bi = p;
          bj = q;
          found = true;
        }
      }
    }

    Cluster& a = clusters[bi];
    Cluster& b = clusters[bj];
    merges.push_back({a.rep, b.rep, best});
    // Ward's criterion is reducible, so merge costs never decrease.
    if (best < last_cost - 1e-9 * std::max(1.0, std::abs(last_cost)))
      throw ValueError("ward_linkage: merge cost decreased");
    last_cost = best;

    std::vector<std::size_t> merged;
    merged.reserve(a.members.size() + b.members.size());
    std::merge(a.members.begin(), a.members.end(), b.members.begin(), b.members.end(),
               std::back_inserter(merged));
    a.members = std::move(merged);
    a.centroid = centroid_of(a.members, points);
    // a's label is already the smaller of the two; rep follows the label.
    b.alive = false;
  }
  return merges;
}

namespace {

// Partition after applying the first `applied` merges, as lists of original
// point indices grouped by cluster.
std::vector<std::vector<std::size_t>> cut_partition(std::size_t n,
                                                    const std::vector<WardMerge>& merges,
                                                    std::size_t applied) {
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  std::vector<std::size_t> root_of(n);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t m = 0; m < applied; ++m) {
    std::size_t ra = find(merges[m].a);
    std::size_t rb = find(merges[m].b);
    parent[rb] = ra;
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

}  // namespace

Taxonomy build_taxonomy(const std::vector<std::pair<std::string, std::vector<double>>>& features,
                        std::size_t k2, std::size_t k1) {
  const std::size_t n = features.size();
  if (n == 0) throw ValueError("build_taxonomy: no environments");
  if (k1 == 0 || k2 == 0 || k1 > k2 || k2 > n)
    throw ValueError("build_taxonomy: need 1 <= k1 <= k2 <= point count");

  std::vector<std::vector<double>> points;
  std::vector<std::string> labels;
  for (const auto& [env_id, fv] : features) {
    labels.push_back(env_id);
    points.push_back(fv);
  }

  Taxonomy tax;
  bool all_same = true;
  for (std::size_t i = 1; i < n; ++i)
    if (points[i] != points[0]) all_same = false;
  if (all_same && n > 1) {
    // Every environment looks identical; clustering would be arbitrary.
    tax.degenerate = true;
    std::string label = *std::min_element(labels.begin(), labels.end());
    std::vector<std::string> everyone = labels;
    std::sort(everyone.begin(), everyone.end());
    tax.first_tier[label] = everyone;
    tax.second_tier[label] = everyone;
    for (const auto& e : labels) tax.assignment[e] = {label, label};
    return tax;
  }

  std::vector<WardMerge> merges = ward_linkage(points, labels);

  auto tier = [&](std::size_t k) {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& group : cut_partition(n, merges, n - k)) {
      std::vector<std::string> ids;
      for (std::size_t i : group) ids.push_back(labels[i]);
      std::sort(ids.begin(), ids.end());
      out[ids.front()] = std::move(ids);
    }
    return out;
  };

  tax.second_tier = tier(k2);
  tax.first_tier = tier(k1);
  for (const auto& [label, ids] : tax.first_tier)
    for (const auto& e : ids) tax.assignment[e].first = label;
  for (const auto& [label, ids] : tax.second_tier)
    for (const auto& e : ids) tax.assignment[e].second = label;
  return tax;
}

Value Taxonomy::to_value() const {
  auto tiers_to_value = [](const std::map<std::string, std::vector<std::string>>& tier) {
    ValueObject o;
    for (const auto& [label, ids] : tier) {
      ValueList xs;
      for (const auto& e : ids) xs.push_back(Value(e));
      o[label] = Value(std::move(xs));
    }
    return Value(std::move(o));
  };
  ValueObject o;
  o["first_tier"] = tiers_to_value(first_tier);
  o["second_tier"] = tiers_to_value(second_tier);
  ValueObject assign;
  for (const auto& [env, labels] : assignment) {
    ValueObject pair;
    pair["first"] = Value(labels.first);
    pair["second"] = Value(labels.second);
    assign[env] = Value(std::move(pair));
  }
  o["assignment"] = Value(std::move(assign));
  o["degenerate"] = Value(degenerate);
  return Value(std::move(o));
}

Taxonomy Taxonomy::from_value(const Value& v) {
  auto tier_from = [](const Value& tv) {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [label, ids] : tv.as_object()) {
      std::vector<std::string> xs;
      for (const auto& e : ids.as_list()) xs.push_back(e.as_string());
      out[label] = std::move(xs);
    }
    return out;
  };
  Taxonomy tax;
  const Value* ft = v.find("first_tier");
  const Value* st = v.find("second_tier");
  const Value* as = v.find("assignment");
  const Value* dg = v.find("degenerate");
  if (!ft || !st || !as || !dg) throw ValueError("taxonomy: missing field");
  tax.first_tier = tier_from(*ft);
  tax.second_tier = tier_from(*st);
  for (const auto& [env, pair] : as->as_object()) {
    const Value* f = pair.find("first");
    const Value* s = pair.find("second");
    if (!f || !s) throw ValueError("taxonomy: malformed assignment");
    tax.assignment[env] = {f->as_string(), s->as_string()};
  }
  tax.degenerate = dg->as_bool();
  return tax;
}

}  // namespace arena
