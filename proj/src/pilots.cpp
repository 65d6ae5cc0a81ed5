// SPDX-License-Identifier: Apache-2.0

#include "xlce/pilots.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace xlce {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::string scheme_name(PilotScheme s) {
  switch (s) {
    case PilotScheme::kGroupedCdm: return "nfdcdm";
    case PilotScheme::kFullBandCdm: return "ocdm";
    case PilotScheme::kPerUserFdm: return "srfdm";
    case PilotScheme::kRandomPhase: return "nocdm";
    case PilotScheme::kOrthogonalMultiSymbol: return "nr-orthogonal";
  }
  throw std::logic_error("scheme_name: unknown scheme");
}

PilotScheme scheme_from_name(const std::string& name) {
  if (name == "nfdcdm" || name == "nfdcdm-optimized") return PilotScheme::kGroupedCdm;
  if (name == "ocdm") return PilotScheme::kFullBandCdm;
  if (name == "srfdm") return PilotScheme::kPerUserFdm;
  if (name == "nocdm") return PilotScheme::kRandomPhase;
  if (name == "nr-orthogonal") return PilotScheme::kOrthogonalMultiSymbol;
  throw std::invalid_argument("unknown pilot scheme: " + name);
}

std::vector<std::vector<int>> group_users(const std::vector<Eigen::Vector3d>& positions,
                                          int n_groups) {
  const int k = static_cast<int>(positions.size());
  if (k < n_groups || n_groups <= 0)
    throw std::invalid_argument("group_users: need 1 <= G <= K");
  const int base = k / n_groups;
  const int extra = k % n_groups;  // `extra` groups get base+1 members

  if (n_groups == k) {
    std::vector<std::vector<int>> out(k);
    for (int i = 0; i < k; ++i) out[i] = {i};
    return out;
  }

  auto dist = [&](int a, int b) { return (positions[a] - positions[b]).norm(); };

  if (base == 2 && extra == 0) {
    // Greedy max-weight matching: repeatedly pair the two farthest free
    // users. Ties resolve to the lexicographically smallest index pair.
    std::vector<std::vector<int>> groups;
    std::vector<bool> used(k, false);
    for (int g = 0; g < n_groups; ++g) {
      int bi = -1, bj = -1;
      double best = -1.0;
      for (int i = 0; i < k; ++i) {
        if (used[i]) continue;
        for (int j = i + 1; j < k; ++j) {
          if (used[j]) continue;
          const double d = dist(i, j);
          if (d > best + 1e-12) { best = d; bi = i; bj = j; }
        }
      }
      used[bi] = used[bj] = true;
      groups.push_back({bi, bj});
    }
    std::sort(groups.begin(), groups.end());
    return groups;
  }

  // General sizes: seed each group with greedy farthest points, then assign
  // the rest to the non-full group adding the most intra-group distance.
  std::vector<int> seeds = {0};
  std::vector<bool> used(k, false);
  used[0] = true;
  while (static_cast<int>(seeds.size()) < n_groups) {
    int pick = -1;
    double best = -1.0;
    for (int i = 0; i < k; ++i) {
      if (used[i]) continue;
      double mind = 1e300;
      for (int s : seeds) mind = std::min(mind, dist(i, s));
      if (mind > best + 1e-12) { best = mind; pick = i; }
    }
    used[pick] = true;
    seeds.push_back(pick);
  }
  std::vector<std::vector<int>> groups(n_groups);
  std::vector<int> cap(n_groups, base);
  for (int g = 0; g < extra; ++g) ++cap[g];
  for (int g = 0; g < n_groups; ++g) groups[g] = {seeds[g]};
  for (int i = 0; i < k; ++i) {
    if (used[i] && std::find(seeds.begin(), seeds.end(), i) != seeds.end()) continue;
    int pick = -1;
    double best = -1e300;
    for (int g = 0; g < n_groups; ++g) {
      if (static_cast<int>(groups[g].size()) >= cap[g]) continue;
      double add = 0.0;
      for (int u : groups[g]) add += dist(i, u);
      if (add > best + 1e-12) { best = add; pick = g; }
    }
    groups[pick].push_back(i);
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end());
  return groups;
}

CVec cyclic_shift_code(int n, double tau) {
  CVec code(n);
  for (int i = 0; i < n; ++i) {
    const double arg = -kTwoPi * tau * i / n;
    code(i) = cplx(std::cos(arg), std::sin(arg));
  }
  return code;
}

IMat periodic_selection(int n, int g) {
  IMat sel = IMat::Zero(n, g);
  for (int i = 0; i < n; ++i) sel(i, i % g) = 1;
  return sel;
}

IMat run_interleaved_selection(int n, const std::vector<std::vector<int>>& groups) {
  const int g = static_cast<int>(groups.size());
  if (g <= 0) throw std::invalid_argument("run_interleaved_selection: no groups");
  std::vector<int> cum(g + 1, 0);
  for (int i = 0; i < g; ++i)
    cum[i + 1] = cum[i] + std::max<int>(1, static_cast<int>(groups[i].size()));
  const int period = cum[g];
  IMat sel = IMat::Zero(n, g);
  for (int i = 0; i < n; ++i) {
    const int j = i % period;
    int grp = 0;
    while (j >= cum[grp + 1]) ++grp;
    sel(i, grp) = 1;
  }
  return sel;
}

IMat thinned_selection(int n, const std::vector<std::vector<int>>& groups,
                       double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw std::invalid_argument("thinned_selection: ratio outside (0, 1]");
  const int g = static_cast<int>(groups.size());
  if (g <= 0) throw std::invalid_argument("thinned_selection: no groups");
  std::vector<int> cum(g + 1, 0);
  for (int i = 0; i < g; ++i)
    cum[i + 1] = cum[i] + std::max<int>(1, static_cast<int>(groups[i].size()));
  const int period = cum[g];
  IMat sel = IMat::Zero(n, g);
  for (int col = 0; col < g; ++col) {
    // One run of |K_g| adjacent subcarriers per period; dropped whole so the
    // run-length DFT nulls (and hence intra-group code orthogonality) survive.
    const int rlen = cum[col + 1] - cum[col];
    std::vector<std::pair<int, int>> runs;  // start, length
    for (int start = cum[col]; start < n; start += period)
      runs.emplace_back(start, std::min(rlen, n - start));
    const int q = static_cast<int>(runs.size());
    const int keep = std::max(1, static_cast<int>(std::floor(ratio * q)));
    for (int j = 0; j < keep; ++j) {
      // Evenly spaced picks across the runs (linspace indexing).
      const int idx =
          keep == 1 ? 0
                    : static_cast<int>(std::lround(j * double(q - 1) / (keep - 1)));
      for (int t = 0; t < runs[idx].second; ++t) sel(runs[idx].first + t, col) = 1;
    }
  }
  return sel;
}

void PilotAllocation::validate() const {
  const int k = static_cast<int>(u.size());
  if (k == 0) throw std::invalid_argument("allocation: no users");
  // Groups sharing an OFDM symbol must occupy disjoint subcarriers. The
  // random-phase scheme deliberately superimposes users and is exempt.
  if (scheme != PilotScheme::kRandomPhase) {
    std::vector<std::vector<int>> cover(n_symbols,
                                        std::vector<int>(n_subcarriers, 0));
    for (const auto& grp : groups)
      for (int sc : grp.subcarriers)
        if (++cover.at(grp.symbol).at(sc) > 1)
          throw std::invalid_argument("allocation: overlapping group selection");
  }
  std::vector<int> seen(k, 0);
  for (const auto& grp : groups)
    for (int uidx : grp.users) ++seen.at(uidx);
  for (int i = 0; i < k; ++i)
    if (seen[i] != 1) throw std::invalid_argument("allocation: user not in exactly one group");
  for (int i = 0; i < k; ++i) {
    const double p = u[i].squaredNorm();
    if (std::abs(p - pilot_power) > 1e-6 * pilot_power)
      throw std::invalid_argument("allocation: pilot power mismatch");
  }
}

namespace {

PilotAllocation assemble_grouped(PilotScheme scheme, const IMat& selection,
                                 const std::vector<std::vector<int>>& groups,
                                 const SystemConfig& sys) {
  const int n = sys.n_subcarriers;
  PilotAllocation alloc;
  alloc.scheme = scheme;
  alloc.n_subcarriers = n;
  alloc.pilot_power = sys.effective_pilot_power();
  alloc.selection = selection;
  alloc.codes.resize(sys.n_users);
  alloc.u.resize(sys.n_users);
  alloc.group_of_user.assign(sys.n_users, -1);

  if (selection.rows() != n || selection.cols() != static_cast<int>(groups.size()))
    throw std::invalid_argument("assemble_pilots: selection shape mismatch");

  for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
    PilotGroup grp;
    grp.users = groups[g];
    std::sort(grp.users.begin(), grp.users.end());
    for (int i = 0; i < n; ++i)
      if (selection(i, g) != 0) grp.subcarriers.push_back(i);
    if (grp.subcarriers.empty())
      throw std::invalid_argument("assemble_pilots: empty group selection");
    const int bg = static_cast<int>(grp.subcarriers.size());
    const double amp = std::sqrt(alloc.pilot_power / bg);
    const int size = static_cast<int>(grp.users.size());
    for (int i = 0; i < size; ++i) {
      const int user = grp.users[i];
      // Artificial delay: evenly spaced over the tap axis, rounded to a tap.
      const double tau = std::lround(double(i) * n / size);
      grp.shifts.push_back(tau);
      CVec code = cyclic_shift_code(n, tau);
      CVec uk = CVec::Zero(n);
      for (int sc : grp.subcarriers) uk(sc) = amp * code(sc);
      alloc.codes[user] = std::move(code);
      alloc.u[user] = std::move(uk);
      alloc.group_of_user[user] = g;
    }
    alloc.groups.push_back(std::move(grp));
  }
  return alloc;
}

}  // namespace

PilotAllocation assemble_pilots(PilotScheme scheme, const IMat& selection,
                                const std::vector<std::vector<int>>& groups,
                                const SystemConfig& sys, Rng& rng) {
  const int n = sys.n_subcarriers;
  switch (scheme) {
    case PilotScheme::kGroupedCdm:
      return assemble_grouped(scheme, selection, groups, sys);
    case PilotScheme::kFullBandCdm: {
      std::vector<int> all(sys.n_users);
      std::iota(all.begin(), all.end(), 0);
      return assemble_grouped(scheme, IMat::Ones(n, 1), {all}, sys);
    }
    case PilotScheme::kPerUserFdm: {
      std::vector<std::vector<int>> singles(sys.n_users);
      for (int k = 0; k < sys.n_users; ++k) singles[k] = {k};
      return assemble_grouped(scheme, periodic_selection(n, sys.n_users), singles, sys);
    }
    case PilotScheme::kRandomPhase: {
      PilotAllocation alloc;
      alloc.scheme = scheme;
      alloc.n_subcarriers = n;
      alloc.pilot_power = sys.effective_pilot_power();
      alloc.selection = IMat::Ones(n, 1);
      PilotGroup grp;
      grp.users.resize(sys.n_users);
      std::iota(grp.users.begin(), grp.users.end(), 0);
      grp.subcarriers.resize(n);
      std::iota(grp.subcarriers.begin(), grp.subcarriers.end(), 0);
      grp.shifts.assign(sys.n_users, 0.0);
      alloc.groups.push_back(grp);
      alloc.codes.resize(sys.n_users);
      alloc.u.resize(sys.n_users);
      alloc.group_of_user.assign(sys.n_users, 0);
      const double amp = std::sqrt(alloc.pilot_power / n);
      std::uniform_real_distribution<double> ph(0.0, kTwoPi);
      for (int k = 0; k < sys.n_users; ++k) {
        CVec code(n);
        for (int i = 0; i < n; ++i) {
          const double a = ph(rng);
          code(i) = cplx(std::cos(a), std::sin(a));
        }
        alloc.codes[k] = code;
        alloc.u[k] = amp * code;
      }
      return alloc;
    }
    case PilotScheme::kOrthogonalMultiSymbol: {
      // At most 8 users per OFDM symbol, orthogonal periodic combs inside
      // each symbol; symbols are interference-free by construction.
      constexpr int kUsersPerSymbol = 8;
      const int n_symbols = (sys.n_users + kUsersPerSymbol - 1) / kUsersPerSymbol;
      PilotAllocation alloc;
      alloc.scheme = scheme;
      alloc.n_subcarriers = n;
      alloc.n_symbols = n_symbols;
      alloc.pilot_power = sys.effective_pilot_power();
      alloc.codes.resize(sys.n_users);
      alloc.u.resize(sys.n_users);
      alloc.group_of_user.assign(sys.n_users, -1);
      alloc.selection = IMat::Zero(n, sys.n_users);
      for (int s = 0; s < n_symbols; ++s) {
        const int first = s * kUsersPerSymbol;
        const int count = std::min(kUsersPerSymbol, sys.n_users - first);
        for (int j = 0; j < count; ++j) {
          const int user = first + j;
          PilotGroup grp;
          grp.users = {user};
          grp.symbol = s;
          grp.shifts = {0.0};
          for (int i = j; i < n; i += count) grp.subcarriers.push_back(i);
          const double amp = std::sqrt(alloc.pilot_power / grp.subcarriers.size());
          CVec uk = CVec::Zero(n);
          for (int sc : grp.subcarriers) {
            alloc.selection(sc, user) = 1;
            uk(sc) = amp;
          }
          alloc.codes[user] = CVec::Ones(n);
          alloc.u[user] = uk;
          alloc.group_of_user[user] = static_cast<int>(alloc.groups.size());
          alloc.groups.push_back(std::move(grp));
        }
      }
      return alloc;
    }
  }
  throw std::logic_error("assemble_pilots: unknown scheme");
}

std::vector<SensingMatrix> build_sensing_matrices(const PilotAllocation& alloc,
                                                  const DftOperators& ops) {
  std::vector<SensingMatrix> mats(alloc.u.size());
  for (std::size_t g = 0; g < alloc.groups.size(); ++g) {
    const auto& grp = alloc.groups[g];
    if (grp.subcarriers.empty())
      throw std::invalid_argument("build_sensing_matrices: empty group");
    const CMat fp = partial_dft_rows(ops, grp.subcarriers);
    for (int user : grp.users) {
      SensingMatrix sm;
      sm.group = static_cast<int>(g);
      sm.rows = grp.subcarriers;
      sm.a = fp;
      for (std::size_t r = 0; r < grp.subcarriers.size(); ++r)
        sm.a.row(static_cast<Eigen::Index>(r)) *= alloc.u[user](grp.subcarriers[r]);
      mats[user] = std::move(sm);
    }
  }
  return mats;
}

std::string allocation_to_json(const PilotAllocation& alloc) {
  nlohmann::json j;
  j["scheme"] = scheme_name(alloc.scheme);
  j["n_subcarriers"] = alloc.n_subcarriers;
  j["n_symbols"] = alloc.n_symbols;
  j["pilot_power"] = alloc.pilot_power;
  // Selection columns as bitstrings, one per group-column.
  std::vector<std::string> cols;
  for (int g = 0; g < alloc.selection.cols(); ++g) {
    std::string bits(alloc.n_subcarriers, '0');
    for (int i = 0; i < alloc.n_subcarriers; ++i)
      if (alloc.selection(i, g) != 0) bits[i] = '1';
    cols.push_back(bits);
  }
  j["selection"] = cols;
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& grp : alloc.groups) {
    nlohmann::json jg;
    jg["users"] = grp.users;
    jg["shifts"] = grp.shifts;
    jg["symbol"] = grp.symbol;
    groups.push_back(jg);
  }
  j["groups"] = groups;
  return j.dump(2);
}

PilotAllocation allocation_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SystemConfig sys;
  sys.n_subcarriers = j.at("n_subcarriers").get<int>();
  const int n = sys.n_subcarriers;
  const auto cols = j.at("selection").get<std::vector<std::string>>();
  IMat sel = IMat::Zero(n, static_cast<int>(cols.size()));
  for (int g = 0; g < sel.cols(); ++g)
    for (int i = 0; i < n; ++i)
      if (cols[g].at(i) == '1') sel(i, g) = 1;
  std::vector<std::vector<int>> groups;
  int n_users = 0;
  for (const auto& jg : j.at("groups")) {
    groups.push_back(jg.at("users").get<std::vector<int>>());
    for (int u : groups.back()) n_users = std::max(n_users, u + 1);
  }
  sys.n_users = n_users;
  sys.n_groups = static_cast<int>(groups.size());
  sys.pilot_power = j.at("pilot_power").get<double>();
  Rng rng(0);
  return assemble_pilots(scheme_from_name(j.at("scheme").get<std::string>()), sel, groups,
                         sys, rng);
}

}  // namespace xlce
