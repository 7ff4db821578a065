#pragma once

// Oriented simplicial complexes for closed manifolds, stored as ordered
// Delta-complexes: every simplex keeps its ascending vertex tuple plus an
// explicit face-id table. Identity of a simplex is its id, not its vertex
// set — the Kuhn triangulation of the 4-torus with n = 2 has distinct cells
// sharing vertex sets, so set-keyed storage would collapse it.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hodgelab::simplicial {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct CochainBasisInfo {
    std::vector<int> offset;  // offset[k] = start of degree k, offset[d+1] = total
    int total() const { return offset.back(); }
    int count(int k) const { return offset[k + 1] - offset[k]; }
};

struct SimplicialComplexData {
    int dim = 0;
    // tuples[k][i] = ascending global vertex ids of the i-th k-simplex
    std::vector<std::vector<std::vector<int>>> tuples;
    // faces[k][i][j] = id of the (k-1)-face of simplex i obtained by omitting
    // the vertex at ascending position j (defined for k >= 1)
    std::vector<std::vector<std::vector<int>>> faces;
    // orientation of each top simplex relative to its ascending tuple
    std::vector<int> orient;

    // geometry: vertex coordinates (possibly empty), optional periodic box,
    // and per-edge lengths (always filled by builders)
    std::vector<VectorXd> vertex_coords;
    std::vector<double> periodic_box;
    std::vector<double> edge_lengths;

    nlohmann::json builder_info;  // how this mesh was built, for exact reload

    int vertex_count() const { return static_cast<int>(tuples[0].size()); }
    int simplex_count(int k) const { return static_cast<int>(tuples[k].size()); }

    CochainBasisInfo basis_info() const {
        CochainBasisInfo b;
        b.offset.resize(dim + 2, 0);
        for (int k = 0; k <= dim; ++k) b.offset[k + 1] = b.offset[k] + simplex_count(k);
        return b;
    }

    // id of the subface of k-simplex `id` spanned by the ascending positions
    // in `kept` (sorted). Walks the face tables dropping positions top-down.
    int subface_id(int k, int id, std::vector<int> kept) const {
        int cur_k = k, cur = id;
        std::vector<int> alive(k + 1);
        std::iota(alive.begin(), alive.end(), 0);
        for (int drop = k; drop >= 0; --drop) {
            if (std::binary_search(kept.begin(), kept.end(), drop)) continue;
            int pos = static_cast<int>(
                std::lower_bound(alive.begin(), alive.end(), drop) - alive.begin());
            cur = faces[cur_k][cur][pos];
            alive.erase(alive.begin() + pos);
            --cur_k;
        }
        return cur;
    }

    double edge_length_between(int top_id, int pos_a, int pos_b) const {
        int e = subface_id(dim, top_id, {std::min(pos_a, pos_b), std::max(pos_a, pos_b)});
        return edge_lengths[e];
    }
};

namespace detail {

inline std::uint64_t pack_key(const std::vector<int>& tuple) {
    std::uint64_t h = 1469598103934665603ull;
    for (int v : tuple) {
        h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull;
        h *= 1099511628211ull;
    }
    return h;
}

// Parity of the permutation sorting `t` ascending; 0 if a vertex repeats.
inline int sort_parity(std::vector<int> t) {
    int swaps = 0;
    for (size_t i = 0; i + 1 < t.size(); ++i)
        for (size_t j = 0; j + 1 < t.size() - i; ++j) {
            if (t[j] == t[j + 1]) return 0;
            if (t[j] > t[j + 1]) {
                std::swap(t[j], t[j + 1]);
                ++swaps;
            }
        }
    return swaps % 2 == 0 ? 1 : -1;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Validation

// Every (d-1)-simplex must lie in exactly two facets, with opposite induced
// orientations. Throws on failure.
inline void check_closed_oriented(const SimplicialComplexData& cx) {
    const int d = cx.dim;
    std::vector<int> induced(cx.simplex_count(d - 1), 0);
    std::vector<int> count(cx.simplex_count(d - 1), 0);
    for (int t = 0; t < cx.simplex_count(d); ++t)
        for (int j = 0; j <= d; ++j) {
            int f = cx.faces[d][t][j];
            int sign = cx.orient[t] * ((j % 2 == 0) ? 1 : -1);
            induced[f] += sign;
            count[f] += 1;
        }
    for (int f = 0; f < cx.simplex_count(d - 1); ++f) {
        if (count[f] != 2)
            throw std::runtime_error("complex is not closed: a ridge lies in " +
                                     std::to_string(count[f]) + " facets");
        if (induced[f] != 0)
            throw std::runtime_error("facet orientations are not consistent");
    }
}

// Propagates an orientation from facet 0 across shared ridges; throws if the
// complex is non-orientable. Returns +-1 per facet (facet 0 gets +1).
inline std::vector<int> propagate_orientation(const SimplicialComplexData& cx) {
    const int d = cx.dim;
    const int nt = cx.simplex_count(d);
    std::map<int, std::vector<std::pair<int, int>>> cofacets;  // ridge -> (facet, pos)
    for (int t = 0; t < nt; ++t)
        for (int j = 0; j <= d; ++j) cofacets[cx.faces[d][t][j]].push_back({t, j});
    std::vector<int> sign(nt, 0);
    sign[0] = 1;
    std::vector<int> stack{0};
    while (!stack.empty()) {
        int t = stack.back();
        stack.pop_back();
        for (int j = 0; j <= d; ++j) {
            int f = cx.faces[d][t][j];
            for (auto [u, ju] : cofacets[f]) {
                if (u == t) continue;
                int want = -sign[t] * ((j % 2 == 0) ? 1 : -1) * ((ju % 2 == 0) ? 1 : -1);
                if (sign[u] == 0) {
                    sign[u] = want;
                    stack.push_back(u);
                } else if (sign[u] != want) {
                    throw std::runtime_error("complex is not orientable");
                }
            }
        }
    }
    for (int t = 0; t < nt; ++t)
        if (sign[t] == 0) throw std::runtime_error("facet graph is not connected");
    return sign;
}

// ---------------------------------------------------------------------------
// Generic construction from facet tuples (identification by vertex set)

inline SimplicialComplexData from_facets(int dim, const std::vector<std::vector<int>>& facets,
                                         std::vector<VectorXd> coords = {},
                                         std::vector<double> periodic_box = {}) {
    SimplicialComplexData cx;
    cx.dim = dim;
    cx.vertex_coords = std::move(coords);
    cx.periodic_box = std::move(periodic_box);

    int nv = 0;
    for (const auto& f : facets) {
        if (static_cast<int>(f.size()) != dim + 1)
            throw std::invalid_argument("facet arity mismatch");
        for (int v : f) nv = std::max(nv, v + 1);
    }
    cx.tuples.assign(dim + 1, {});
    cx.faces.assign(dim + 1, {});
    cx.tuples[0].resize(nv);
    for (int v = 0; v < nv; ++v) cx.tuples[0][v] = {v};

    // enumerate faces by vertex set, ascending degree
    std::vector<std::map<std::vector<int>, int>> index(dim + 1);
    for (int v = 0; v < nv; ++v) index[0][{v}] = v;
    for (const auto& f : facets) {
        std::vector<int> sorted = f;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("facet repeats a vertex");
        const int m = dim + 1;
        for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
            int k = __builtin_popcount(mask) - 1;
            if (k < 1) continue;
            std::vector<int> sub;
            for (int i = 0; i < m; ++i)
                if (mask & (1u << i)) sub.push_back(sorted[i]);
            index[k].emplace(sub, 0);
        }
    }
    for (int k = 1; k <= dim; ++k) {
        int id = 0;
        for (auto& [tuple, slot] : index[k]) {
            slot = id++;
            cx.tuples[k].push_back(tuple);
        }
        cx.faces[k].resize(cx.tuples[k].size());
        for (size_t i = 0; i < cx.tuples[k].size(); ++i) {
            cx.faces[k][i].resize(k + 1);
            for (int j = 0; j <= k; ++j) {
                std::vector<int> sub = cx.tuples[k][i];
                sub.erase(sub.begin() + j);
                cx.faces[k][i][j] = (k == 1) ? sub[0] : index[k - 1].at(sub);
            }
        }
    }

    // duplicate facet sets are a modelling error in set-identified complexes
    if (index[dim].size() != facets.size())
        throw std::invalid_argument("duplicate facet vertex sets");

    // orientation: the input order of each facet tuple is its orientation
    cx.orient.assign(cx.simplex_count(dim), 0);
    for (const auto& f : facets) {
        std::vector<int> sorted = f;
        std::sort(sorted.begin(), sorted.end());
        int id = index[dim].at(sorted);
        cx.orient[id] = detail::sort_parity(f);
    }

    // edge lengths from coordinates (periodic minimum-image if requested)
    cx.edge_lengths.resize(cx.simplex_count(1));
    for (int e = 0; e < cx.simplex_count(1); ++e) {
        if (cx.vertex_coords.empty()) {
            cx.edge_lengths[e] = 1.0;
            continue;
        }
        VectorXd diff = cx.vertex_coords[cx.tuples[1][e][1]] - cx.vertex_coords[cx.tuples[1][e][0]];
        if (!cx.periodic_box.empty())
            for (int c = 0; c < diff.size(); ++c) {
                double L = cx.periodic_box[c];
                diff[c] -= L * std::round(diff[c] / L);
            }
        cx.edge_lengths[e] = diff.norm();
    }
    return cx;
}

// ---------------------------------------------------------------------------
// Kuhn triangulation of the periodic lattice torus (d = 1, 2, 4, ...)
//
// Simplices are chains anchor, anchor+chi(S1), ..., anchor+chi(Sk) for a
// strictly increasing chain of nonempty subsets S1 c ... c Sk of the axes.
// Identification is by (anchor, chain), which stays correct at n = 2 where
// vertex sets coincide between antipodal cells.

inline SimplicialComplexData kuhn_torus(int d, int n) {
    if (d < 1 || d > 4) throw std::invalid_argument("kuhn_torus: dim out of range");
    const std::int64_t cells = [&] {
        std::int64_t c = 1;
        for (int i = 0; i < d; ++i) c *= n;
        return c;
    }();

    // enumerate ascending chains of nonempty subsets of {0..d-1}
    std::vector<std::vector<std::vector<std::uint32_t>>> chains_by_len(d + 1);
    chains_by_len[0].push_back({});
    for (int len = 1; len <= d; ++len)
        for (const auto& c : chains_by_len[len - 1])
            for (std::uint32_t s = c.empty() ? 1 : c.back() + 1; s < (1u << d); ++s) {
                if (!c.empty() && (c.back() & ~s)) continue;
                if (!c.empty() && s == c.back()) continue;
                if (!c.empty() && !((s & ~c.back()))) continue;
                auto cc = c;
                cc.push_back(s);
                chains_by_len[len].push_back(cc);
            }

    std::int64_t per_cell = 0;
    for (int k = 0; k <= d; ++k) per_cell += static_cast<std::int64_t>(chains_by_len[k].size());
    if (cells * per_cell > 1'000'000) throw std::invalid_argument("desk-scale limit");

    SimplicialComplexData cx;
    cx.dim = d;
    cx.tuples.assign(d + 1, {});
    cx.faces.assign(d + 1, {});

    auto vid = [&](std::vector<int> p) {
        int id = 0;
        for (int i = d - 1; i >= 0; --i) id = id * n + ((p[i] % n + n) % n);
        return id;
    };

    // unit-size torus: lattice spacing 1/n on each axis
    const int nv = static_cast<int>(cells);
    const double h = 1.0 / double(n);
    cx.tuples[0].resize(nv);
    cx.vertex_coords.resize(nv);
    for (int v = 0; v < nv; ++v) {
        cx.tuples[0][v] = {v};
        VectorXd c(d);
        int r = v;
        for (int i = 0; i < d; ++i) {
            c[i] = (r % n) * h;
            r /= n;
        }
        cx.vertex_coords[v] = c;
    }
    cx.periodic_box.assign(d, 1.0);

    using Key = std::pair<int, std::vector<std::uint32_t>>;
    std::vector<std::map<Key, int>> ids(d + 1);
    for (int v = 0; v < nv; ++v) ids[0][{v, {}}] = v;

    auto chain_vertices = [&](int anchor, const std::vector<std::uint32_t>& chain) {
        std::vector<int> vs{anchor};
        std::vector<int> p(d);
        int r = anchor;
        for (int i = 0; i < d; ++i) {
            p[i] = r % n;
            r /= n;
        }
        for (auto s : chain) {
            std::vector<int> q = p;
            for (int i = 0; i < d; ++i)
                if (s & (1u << i)) q[i] += 1;
            vs.push_back(vid(q));
        }
        return vs;
    };

    // register all simplices of each degree
    for (int k = 1; k <= d; ++k) {
        for (int a = 0; a < nv; ++a)
            for (const auto& c : chains_by_len[k]) {
                int id = static_cast<int>(cx.tuples[k].size());
                ids[k][{a, c}] = id;
                std::vector<int> vs = chain_vertices(a, c);
                std::vector<int> sorted = vs;
                std::sort(sorted.begin(), sorted.end());
                cx.tuples[k].push_back(sorted);
            }
    }

    // face tables: drop chain position, then translate to ascending position
    for (int k = 1; k <= d; ++k) {
        cx.faces[k].resize(cx.tuples[k].size());
        for (int a = 0; a < nv; ++a)
            for (const auto& c : chains_by_len[k]) {
                int id = ids[k].at({a, c});
                std::vector<int> vs = chain_vertices(a, c);
                // chain-position face ids
                std::vector<int> face_chain(k + 1);
                for (int j = 0; j <= k; ++j) {
                    if (j == 0) {
                        std::vector<std::uint32_t> nc;
                        for (size_t i = 1; i < c.size(); ++i) nc.push_back(c[i] & ~c[0]);
                        face_chain[j] = ids[k - 1].at({vs[1], nc});
                    } else {
                        std::vector<std::uint32_t> nc = c;
                        nc.erase(nc.begin() + (j - 1));
                        face_chain[j] = ids[k - 1].at({a, nc});
                    }
                }
                // ascending position p holds vertex vs_sorted[p]; find its chain position
                std::vector<int> order(k + 1);
                std::iota(order.begin(), order.end(), 0);
                std::sort(order.begin(), order.end(),
                          [&](int x, int y) { return vs[x] < vs[y]; });
                cx.faces[k][id].resize(k + 1);
                for (int p = 0; p <= k; ++p) cx.faces[k][id][p] = face_chain[order[p]];
            }
    }

    // orientation: chain order has sign sgn(pi); convert to ascending order
    cx.orient.assign(cx.simplex_count(d), 0);
    for (int a = 0; a < nv; ++a)
        for (const auto& c : chains_by_len[d]) {
            int id = ids[d].at({a, c});
            std::vector<std::uint32_t> incr;
            std::uint32_t prev = 0;
            for (auto s : c) {
                incr.push_back(s & ~prev);
                prev = s;
            }
            std::vector<int> perm;
            for (auto s : incr) perm.push_back(__builtin_ctz(s));
            int sgn_pi = detail::sort_parity(perm);
            std::vector<int> vs = chain_vertices(a, c);
            cx.orient[id] = sgn_pi * detail::sort_parity(vs);
        }

    // exact edge lengths: an edge's displacement is chi(S1) / n
    cx.edge_lengths.resize(cx.simplex_count(1));
    for (int a = 0; a < nv; ++a)
        for (const auto& c : chains_by_len[1])
            cx.edge_lengths[ids[1].at({a, c})] = std::sqrt(double(__builtin_popcount(c[0]))) * h;

    check_closed_oriented(cx);
    return cx;
}

// ---------------------------------------------------------------------------
// Builders

inline SimplicialComplexData build_circle(int n) {
    if (n < 3) throw std::invalid_argument("build_circle: n must be >= 3");
    SimplicialComplexData cx = kuhn_torus(1, n);
    cx.builder_info = {{"name", "circle"}, {"n", n}};
    return cx;
}

inline SimplicialComplexData build_torus2(int n) {
    if (n < 3) throw std::invalid_argument("build_torus2: n must be >= 3");
    SimplicialComplexData cx = kuhn_torus(2, n);
    cx.builder_info = {{"name", "torus2"}, {"n", n}};
    return cx;
}

inline SimplicialComplexData build_torus4(int n) {
    if (n < 2) throw std::invalid_argument("build_torus4: n must be >= 2");
    SimplicialComplexData cx = kuhn_torus(4, n);
    cx.builder_info = {{"name", "torus4"}, {"n", n}};
    return cx;
}

inline SimplicialComplexData build_icosphere(int subdiv) {
    if (subdiv < 0) throw std::invalid_argument("build_icosphere: subdiv must be >= 0");
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<VectorXd> pts;
    auto add = [&](double x, double y, double z) {
        VectorXd p(3);
        p << x, y, z;
        pts.push_back(p / p.norm());
    };
    add(-1, phi, 0); add(1, phi, 0); add(-1, -phi, 0); add(1, -phi, 0);
    add(0, -1, phi); add(0, 1, phi); add(0, -1, -phi); add(0, 1, -phi);
    add(phi, 0, -1); add(phi, 0, 1); add(-phi, 0, -1); add(-phi, 0, 1);
    std::vector<std::vector<int>> fac = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (int s = 0; s < subdiv; ++s) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            VectorXd m = (pts[a] + pts[b]) / 2.0;
            pts.push_back(m / m.norm());
            int id = static_cast<int>(pts.size()) - 1;
            mid[key] = id;
            return id;
        };
        std::vector<std::vector<int>> next;
        for (const auto& f : fac) {
            int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        fac = std::move(next);
    }
    // force outward orientation (positive enclosed volume)
    double vol6 = 0.0;
    for (const auto& f : fac) {
        Eigen::Matrix3d m;
        m.col(0) = pts[f[0]];
        m.col(1) = pts[f[1]];
        m.col(2) = pts[f[2]];
        vol6 += m.determinant();
    }
    if (vol6 < 0)
        for (auto& f : fac) std::swap(f[1], f[2]);
    SimplicialComplexData cx = from_facets(2, fac, pts);
    check_closed_oriented(cx);
    cx.builder_info = {{"name", "icosphere"}, {"subdiv", subdiv}};
    return cx;
}

// The 36 facets of the 9-vertex complex projective plane, as ordered tuples
// whose listed order carries the orientation giving intersection-form
// signature +1. Derived by orbit search under the Z3 x Z3 translation group
// of the affine plane on the vertices and verified at build time.
inline const std::vector<std::vector<int>>& cp2_facet_data() {
    static const std::vector<std::vector<int>> facets = {
        {1, 0, 2, 3, 4}, {0, 1, 2, 3, 5}, {1, 0, 2, 4, 5}, {1, 0, 6, 7, 8},
        {0, 2, 6, 7, 8}, {2, 1, 6, 7, 8}, {4, 3, 5, 6, 7}, {3, 4, 5, 6, 8},
        {4, 3, 5, 7, 8}, {0, 1, 3, 4, 6}, {0, 1, 3, 6, 7}, {0, 2, 3, 5, 8},
        {0, 2, 5, 6, 8}, {0, 3, 4, 6, 7}, {1, 2, 4, 5, 7}, {1, 2, 4, 7, 8},
        {1, 4, 5, 7, 8}, {2, 3, 5, 6, 8}, {1, 0, 3, 5, 7}, {0, 1, 5, 7, 8},
        {2, 0, 4, 5, 6}, {2, 0, 4, 6, 7}, {3, 0, 5, 7, 8}, {1, 2, 3, 4, 8},
        {2, 1, 3, 6, 8}, {3, 1, 4, 6, 8}, {2, 4, 5, 6, 7}, {0, 1, 4, 5, 6},
        {1, 0, 5, 6, 8}, {2, 0, 3, 4, 8}, {2, 0, 4, 7, 8}, {0, 3, 4, 7, 8},
        {2, 1, 3, 5, 7}, {1, 2, 3, 6, 7}, {4, 1, 5, 6, 8}, {3, 2, 5, 6, 7}};
    return facets;
}

std::vector<std::array<int, 2>> betti_numbers_two_primes(const SimplicialComplexData& cx);

inline SimplicialComplexData build_cp2_kuhnel() {
    SimplicialComplexData cx = from_facets(4, cp2_facet_data());
    // verification pass: never trust the transcription
    check_closed_oriented(cx);
    std::array<int, 5> want_f{9, 36, 84, 90, 36};
    for (int k = 0; k <= 4; ++k)
        if (cx.simplex_count(k) != want_f[k])
            throw std::runtime_error("cp2: face count mismatch");
    // vertex links must look like 3-spheres: chi(link) = 0
    for (int v = 0; v < 9; ++v) {
        std::map<std::vector<int>, bool> lk[4];
        for (const auto& f : cp2_facet_data()) {
            if (std::find(f.begin(), f.end(), v) == f.end()) continue;
            std::vector<int> rest;
            for (int w : f)
                if (w != v) rest.push_back(w);
            std::sort(rest.begin(), rest.end());
            for (std::uint32_t m = 1; m < 16; ++m) {
                std::vector<int> sub;
                for (int i = 0; i < 4; ++i)
                    if (m & (1u << i)) sub.push_back(rest[i]);
                lk[sub.size() - 1][sub] = true;
            }
        }
        long chi = 0;
        for (int k = 0; k < 4; ++k) chi += (k % 2 == 0 ? 1 : -1) * long(lk[k].size());
        if (chi != 0) throw std::runtime_error("cp2: vertex link is not a 3-sphere");
    }
    auto b = betti_numbers_two_primes(cx);
    std::array<int, 5> want_b{1, 0, 1, 0, 1};
    for (int k = 0; k <= 4; ++k)
        if (b[k][0] != want_b[k] || b[k][1] != want_b[k])
            throw std::runtime_error("cp2: Betti vector mismatch");
    cx.builder_info = {{"name", "cp2"}};
    return cx;
}

// ---------------------------------------------------------------------------
// Combinatorial invariants

inline long euler_characteristic(const SimplicialComplexData& cx) {
    long chi = 0;
    for (int k = 0; k <= cx.dim; ++k)
        chi += (k % 2 == 0 ? 1 : -1) * long(cx.simplex_count(k));
    return chi;
}

// Signed coboundary from k-cochains to (k+1)-cochains (integer entries).
inline Eigen::SparseMatrix<double> coboundary_matrix(const SimplicialComplexData& cx, int k) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < cx.simplex_count(k + 1); ++i)
        for (int j = 0; j <= k + 1; ++j)
            trips.emplace_back(i, cx.faces[k + 1][i][j], (j % 2 == 0) ? 1.0 : -1.0);
    Eigen::SparseMatrix<double> d(cx.simplex_count(k + 1), cx.simplex_count(k));
    d.setFromTriplets(trips.begin(), trips.end());
    return d;
}

namespace detail {

// Rank of an integer matrix over GF(p) by Gaussian elimination.
inline int rank_mod_p(std::vector<std::vector<std::int64_t>> m, std::int64_t p) {
    const int rows = static_cast<int>(m.size());
    if (rows == 0) return 0;
    const int cols = static_cast<int>(m[0].size());
    auto inv_mod = [&](std::int64_t a) {
        std::int64_t r = 1, b = a % p, e = p - 2;
        while (e) {
            if (e & 1) r = (__int128)r * b % p;
            b = (__int128)b * b % p;
            e >>= 1;
        }
        return r;
    };
    int rank = 0;
    for (int c = 0; c < cols && rank < rows; ++c) {
        int pivot = -1;
        for (int r = rank; r < rows; ++r)
            if (m[r][c] % p != 0) {
                pivot = r;
                break;
            }
        if (pivot < 0) continue;
        std::swap(m[rank], m[pivot]);
        std::int64_t inv = inv_mod(((m[rank][c] % p) + p) % p);
        for (int r = rank + 1; r < rows; ++r) {
            std::int64_t f = ((m[r][c] % p) + p) % p;
            if (!f) continue;
            std::int64_t mult = (__int128)f * inv % p;
            for (int cc = c; cc < cols; ++cc)
                m[r][cc] = ((m[r][cc] - (__int128)mult * m[rank][cc]) % p + p) % p;
        }
        ++rank;
    }
    return rank;
}

inline int coboundary_rank_mod_p(const SimplicialComplexData& cx, int k, std::int64_t p) {
    const int rows = cx.simplex_count(k + 1), cols = cx.simplex_count(k);
    // eliminate along the smaller dimension
    bool transpose = rows > cols;
    std::vector<std::vector<std::int64_t>> m(transpose ? cols : rows,
                                             std::vector<std::int64_t>(transpose ? rows : cols, 0));
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j <= k + 1; ++j) {
            int c = cx.faces[k + 1][i][j];
            std::int64_t v = (j % 2 == 0) ? 1 : -1;
            if (transpose)
                m[c][i] += v;
            else
                m[i][c] += v;
        }
    return rank_mod_p(std::move(m), p);
}

}  // namespace detail

// Betti numbers computed as rank-nullity over two distinct prime fields;
// the two columns must agree for the result to be trusted.
inline std::vector<std::array<int, 2>> betti_numbers_two_primes(const SimplicialComplexData& cx) {
    const std::int64_t primes[2] = {1'000'003, 999'999'937};
    std::vector<std::array<int, 2>> b(cx.dim + 1);
    for (int pi = 0; pi < 2; ++pi) {
        std::vector<int> rank(cx.dim + 1, 0);
        for (int k = 0; k < cx.dim; ++k)
            rank[k] = detail::coboundary_rank_mod_p(cx, k, primes[pi]);
        for (int k = 0; k <= cx.dim; ++k) {
            int zk = cx.simplex_count(k) - (k < cx.dim ? rank[k] : 0);
            b[k][pi] = zk - (k > 0 ? rank[k - 1] : 0);
        }
    }
    return b;
}

// Betti vector with the two-prime agreement check enforced.
inline std::vector<int> betti_numbers(const SimplicialComplexData& cx) {
    auto b2 = betti_numbers_two_primes(cx);
    std::vector<int> b(cx.dim + 1);
    for (int k = 0; k <= cx.dim; ++k) {
        if (b2[k][0] != b2[k][1])
            throw std::runtime_error("betti: prime fields disagree (torsion?)");
        b[k] = b2[k][0];
    }
    return b;
}

// ---------------------------------------------------------------------------
// Cup product pairing on middle-degree cocycles (Alexander-Whitney)

inline double cup_product_form(const SimplicialComplexData& cx, const VectorXd& a,
                               const VectorXd& b, double cocycle_tol = 1e-8) {
    if (cx.dim % 4 != 0) throw std::invalid_argument("cup pairing needs dim divisible by 4");
    const int k = cx.dim / 2;
    if (a.size() != cx.simplex_count(k) || b.size() != cx.simplex_count(k))
        throw std::invalid_argument("cochain size mismatch");
    auto d = coboundary_matrix(cx, k);
    for (const VectorXd* c : {&a, &b})
        if ((d * *c).cwiseAbs().maxCoeff() > cocycle_tol * std::max(1.0, c->cwiseAbs().maxCoeff()))
            throw std::invalid_argument("not a cocycle");
    std::vector<int> front_keep(k + 1), back_keep(k + 1);
    std::iota(front_keep.begin(), front_keep.end(), 0);
    std::iota(back_keep.begin(), back_keep.end(), k);
    double q = 0.0;
    for (int t = 0; t < cx.simplex_count(cx.dim); ++t) {
        int f = cx.subface_id(cx.dim, t, front_keep);
        int g = cx.subface_id(cx.dim, t, back_keep);
        q += cx.orient[t] * a[f] * b[g];
    }
    return q;
}

// ---------------------------------------------------------------------------
// Mesh I/O

inline nlohmann::json mesh_to_json(const SimplicialComplexData& cx) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["dim"] = cx.dim;
    nlohmann::json verts = nlohmann::json::array();
    for (const auto& p : cx.vertex_coords) {
        nlohmann::json row = nlohmann::json::array();
        for (int i = 0; i < p.size(); ++i) row.push_back(p[i]);
        verts.push_back(row);
    }
    j["vertices"] = verts;
    nlohmann::json fac = nlohmann::json::array();
    const int d = cx.dim;
    for (int t = 0; t < cx.simplex_count(d); ++t) {
        std::vector<int> tup = cx.tuples[d][t];
        if (cx.orient[t] < 0) std::swap(tup[0], tup[1]);
        fac.push_back(tup);
    }
    j["facets"] = fac;
    if (!cx.periodic_box.empty()) j["periodic_box"] = cx.periodic_box;
    if (!cx.builder_info.is_null()) j["builder"] = cx.builder_info;
    return j;
}

inline SimplicialComplexData build_by_name(const std::string& name, int param) {
    if (name == "circle") return build_circle(param);
    if (name == "torus2") return build_torus2(param);
    if (name == "torus4") return build_torus4(param);
    if (name == "icosphere") return build_icosphere(param);
    if (name == "cp2") return build_cp2_kuhnel();
    throw std::invalid_argument("unknown builder: " + name);
}

inline SimplicialComplexData mesh_from_json(const nlohmann::json& j) {
    if (j.contains("builder")) {
        const auto& b = j["builder"];
        std::string name = b["name"];
        int param = 0;
        if (b.contains("n")) param = b["n"];
        if (b.contains("subdiv")) param = b["subdiv"];
        return build_by_name(name, param);
    }
    int dim = j["dim"];
    std::vector<VectorXd> coords;
    for (const auto& row : j["vertices"]) {
        VectorXd p(row.size());
        for (size_t i = 0; i < row.size(); ++i) p[i] = row[i];
        coords.push_back(p);
    }
    std::vector<std::vector<int>> facets;
    for (const auto& f : j["facets"]) facets.push_back(f.get<std::vector<int>>());
    std::vector<double> box;
    if (j.contains("periodic_box")) box = j["periodic_box"].get<std::vector<double>>();
    SimplicialComplexData cx = from_facets(dim, facets, coords, box);
    check_closed_oriented(cx);
    return cx;
}

inline void save_mesh(const SimplicialComplexData& cx, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << mesh_to_json(cx).dump(2) << "\n";
}

inline SimplicialComplexData load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    nlohmann::json j;
    in >> j;
    return mesh_from_json(j);
}

// ASCII OFF import for surface meshes.
inline SimplicialComplexData load_off(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string header;
    in >> header;
    if (header != "OFF") throw std::runtime_error("not an OFF file");
    int nv, nf, ne;
    in >> nv >> nf >> ne;
    std::vector<VectorXd> coords(nv);
    for (int v = 0; v < nv; ++v) {
        VectorXd p(3);
        in >> p[0] >> p[1] >> p[2];
        coords[v] = p;
    }
    std::vector<std::vector<int>> facets;
    for (int f = 0; f < nf; ++f) {
        int arity;
        in >> arity;
        if (arity != 3) throw std::runtime_error("OFF import supports triangles only");
        std::vector<int> tri(3);
        in >> tri[0] >> tri[1] >> tri[2];
        facets.push_back(tri);
    }
    SimplicialComplexData cx = from_facets(2, facets, coords);
    check_closed_oriented(cx);
    return cx;
}

// ---------------------------------------------------------------------------
// PL-metric perturbation (resampled until every facet stays non-degenerate)

inline bool facet_metrics_valid(const SimplicialComplexData& cx) {
    const int d = cx.dim;
    for (int t = 0; t < cx.simplex_count(d); ++t) {
        MatrixXd B(d, d);
        for (int i = 1; i <= d; ++i)
            for (int j = 1; j <= d; ++j) {
                double l0i = cx.edge_length_between(t, 0, i);
                double l0j = cx.edge_length_between(t, 0, j);
                double lij = (i == j) ? 0.0 : cx.edge_length_between(t, i, j);
                B(i - 1, j - 1) = 0.5 * (l0i * l0i + l0j * l0j - lij * lij);
            }
        Eigen::LLT<MatrixXd> llt(B);
        if (llt.info() != Eigen::Success) return false;
        double det = B.determinant();
        if (!(det > 1e-12)) return false;
    }
    return true;
}

inline SimplicialComplexData perturb_edge_lengths(const SimplicialComplexData& cx,
                                                  double relative, std::mt19937_64& rng,
                                                  int max_tries = 200) {
    std::uniform_real_distribution<double> u(-relative, relative);
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        SimplicialComplexData out = cx;
        for (auto& l : out.edge_lengths) l = l * (1.0 + u(rng));
        if (facet_metrics_valid(out)) return out;
    }
    throw std::runtime_error("perturb_edge_lengths: no valid sample found");
}

}  // namespace hodgelab::simplicial
