#include <charconv>
#include <sstream>

#include "cplan/errors.hpp"
#include "cplan/scenario.hpp"

namespace cplan {

namespace {

std::string num(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::vector<double>> parse_rows(const std::string& text, const std::string& what,
                                             size_t columns) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  if (!std::getline(is, line)) throw ShapeError(what + " is empty");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    size_t start = 0;
    while (start <= line.size()) {
      size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      double v = 0.0;
      auto r = std::from_chars(line.data() + start, line.data() + end, v);
      if (r.ec != std::errc() || r.ptr != line.data() + end)
        throw ShapeError(what + " line " + std::to_string(lineno) + ": bad number");
      row.push_back(v);
      start = end + 1;
    }
    if (row.size() != columns)
      throw ShapeError(what + " line " + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                       " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void write_plan_csv(std::ostream& os, const Plan& p) {
  os << "slot,ue,p_a_watts,p_j_watts,uirs_x,uirs_y,uirs_z,uirs_vx,uirs_vy,uirs_vz,"
        "ucj_x,ucj_y,ucj_z,ucj_vx,ucj_vy,ucj_vz\n";
  for (int n = 0; n < p.slots(); ++n) {
    os << n + 1 << ',' << p.scheduled(n) + 1 << ',' << num(p.p_a[n]) << ',' << num(p.p_j[n]);
    for (const Trajectory* t : {&p.traj_r, &p.traj_j}) {
      for (int i = 0; i < 3; ++i) os << ',' << num(t->positions[n][i]);
      for (int i = 0; i < 3; ++i) os << ',' << num(t->velocities[n][i]);
    }
    os << '\n';
  }
}

void write_phases_csv(std::ostream& os, const Plan& p) {
  os << "slot,element,amplitude,phase_rad,re,im\n";
  for (int n = 0; n < p.slots(); ++n)
    for (int l = 0; l < p.phi[n].size(); ++l) {
      const cd v = p.phi[n][l];
      os << n + 1 << ',' << l + 1 << ',' << num(std::abs(v)) << ',' << num(std::arg(v)) << ','
         << num(v.real()) << ',' << num(v.imag()) << '\n';
    }
}

Plan read_plan_csv(const Scenario& s, const std::string& plan_csv, const std::string& phases_csv) {
  const int N = s.slots, K = s.K(), L = s.L();
  auto rows = parse_rows(plan_csv, "plan.csv", 16);
  if (static_cast<int>(rows.size()) != N)
    throw ShapeError("plan.csv has " + std::to_string(rows.size()) + " slots, scenario has " + std::to_string(N));
  Plan p;
  p.alpha = Eigen::MatrixXi::Zero(N, K);
  p.p_a.resize(N);
  p.p_j.resize(N);
  for (Trajectory* t : {&p.traj_r, &p.traj_j}) {
    t->positions.resize(N);
    t->velocities.resize(N);
  }
  for (int n = 0; n < N; ++n) {
    const auto& r = rows[n];
    if (r[0] != n + 1) throw ShapeError("plan.csv slots must be 1.." + std::to_string(N) + " in order");
    const int ue = static_cast<int>(r[1]);
    if (ue != r[1] || ue < 0 || ue > K)
      throw ShapeError("plan.csv slot " + std::to_string(n + 1) + ": ue must be 0.." + std::to_string(K));
    if (ue > 0) p.alpha(n, ue - 1) = 1;
    p.p_a[n] = r[2];
    p.p_j[n] = r[3];
    p.traj_r.positions[n] = Vec3(r[4], r[5], r[6]);
    p.traj_r.velocities[n] = Vec3(r[7], r[8], r[9]);
    p.traj_j.positions[n] = Vec3(r[10], r[11], r[12]);
    p.traj_j.velocities[n] = Vec3(r[13], r[14], r[15]);
  }
  auto ph = parse_rows(phases_csv, "phases.csv", 6);
  if (static_cast<long long>(ph.size()) != static_cast<long long>(N) * L)
    throw ShapeError("phases.csv has " + std::to_string(ph.size()) + " rows, expected N*L = " +
                     std::to_string(N * L));
  p.phi.assign(N, CVec::Zero(L));
  for (const auto& r : ph) {
    const int n = static_cast<int>(r[0]) - 1, l = static_cast<int>(r[1]) - 1;
    if (n < 0 || n >= N || l < 0 || l >= L) throw ShapeError("phases.csv index out of range");
    p.phi[n][l] = cd(r[4], r[5]);
  }
  check_plan_shape(s, p);
  return p;
}

}  // namespace cplan
