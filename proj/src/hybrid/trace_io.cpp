// Copyright 2026 The sepsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sepsim/hybrid.hpp"

namespace sepsim {
namespace {

void Columns(std::vector<std::string>& names, const char* prefix, long n) {
  for (long i = 0; i < n; ++i) names.push_back(fmt::format("{}{}", prefix, i));
}

void Append(std::string& line, const VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    line += ',';
    line += FormatDouble(v(i));
  }
}

std::vector<std::string> Split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

int CountPrefix(const std::vector<std::string>& header, const std::string& p) {
  int n = 0;
  for (const auto& h : header) {
    if (h.size() > p.size() && h.compare(0, p.size(), p) == 0 &&
        std::isdigit(static_cast<unsigned char>(h[p.size()]))) {
      ++n;
    }
  }
  return n;
}

double ToDouble(const std::string& s, int row) {
  try {
    size_t used = 0;
    const double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kSchema,
                fmt::format("trace row {}: bad number '{}'", row, s));
  }
}

}  // namespace

std::string FormatDouble(double x) { return fmt::format("{:.17g}", x); }

void WriteTraceCsv(const Trace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kConfig, "cannot write " + path);
  std::vector<std::string> names = {"t", "domain", "step"};
  if (!trace.samples.empty()) {
    const TraceSample& s = trace.samples.front();
    Columns(names, "q", s.q.size());
    Columns(names, "v", s.v.size());
    Columns(names, "u", s.u.size());
    Columns(names, "c", s.coupling.size());
    names.insert(names.end(), {"tau", "tau_dot", "tau_ddot"});
    Columns(names, "y", s.outputs.size());
  }
  f << fmt::format("{}\n", fmt::join(names, ","));
  for (const TraceSample& s : trace.samples) {
    std::string line = FormatDouble(s.t);
    line += fmt::format(",{},{}", VertexName(s.vertex), s.step);
    Append(line, s.q);
    Append(line, s.v);
    Append(line, s.u);
    Append(line, s.coupling);
    line += fmt::format(",{},{},{}", FormatDouble(s.phase.tau),
                        FormatDouble(s.phase.tau_dot),
                        FormatDouble(s.phase.tau_ddot));
    Append(line, s.outputs);
    f << line << '\n';
  }
}

void WriteImpactsCsv(const Trace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kConfig, "cannot write " + path);
  f << "step,t,from,to,guard,kinetic_before,kinetic_after,"
       "post_velocity_residual,impulse_norm\n";
  for (const ImpactEvent& e : trace.impacts) {
    f << fmt::format("{},{},{},{},{},{},{},{},{}\n", e.step, FormatDouble(e.t),
                     VertexName(e.from), VertexName(e.to), FormatDouble(e.guard),
                     FormatDouble(e.kinetic_before),
                     FormatDouble(e.kinetic_after),
                     FormatDouble(e.post_velocity_residual),
                     FormatDouble(e.impulse.norm()));
  }
}

Trace ReadTraceCsv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kConfig, "cannot open trace " + path);
  std::string line;
  if (!std::getline(f, line)) throw Error(ErrorKind::kSchema, "empty trace file");
  const std::vector<std::string> header = Split(line);
  if (header.size() < 3 || header[0] != "t" || header[1] != "domain" ||
      header[2] != "step") {
    throw Error(ErrorKind::kSchema, "trace header must start with t,domain,step");
  }
  const int nq = CountPrefix(header, "q"), nv = CountPrefix(header, "v"),
            nu = CountPrefix(header, "u"), nc = CountPrefix(header, "c"),
            ny = CountPrefix(header, "y");
  const size_t width = 3 + nq + nv + nu + nc + 3 + ny;
  if (header.size() != width) {
    throw Error(ErrorKind::kSchema, "unrecognized trace columns");
  }
  Trace trace;
  int row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> c = Split(line);
    if (c.size() != width) {
      throw Error(ErrorKind::kSchema, fmt::format("trace row {}: {} columns, expected {}",
                                                  row, c.size(), width));
    }
    TraceSample s;
    s.t = ToDouble(c[0], row);
    if (c[1] == "pt") {
      s.vertex = Vertex::kPt;
    } else if (c[1] == "pw") {
      s.vertex = Vertex::kPw;
    } else {
      throw Error(ErrorKind::kSchema, fmt::format("trace row {}: unknown domain", row));
    }
    s.step = static_cast<int>(ToDouble(c[2], row));
    size_t k = 3;
    auto read = [&](int n) {
      VectorXd v(n);
      for (int i = 0; i < n; ++i) v(i) = ToDouble(c[k++], row);
      return v;
    };
    s.q = read(nq);
    s.v = read(nv);
    s.u = read(nu);
    s.coupling = read(nc);
    s.phase.tau = ToDouble(c[k++], row);
    s.phase.tau_dot = ToDouble(c[k++], row);
    s.phase.tau_ddot = ToDouble(c[k++], row);
    s.outputs = read(ny);

    const int idx = static_cast<int>(trace.samples.size());
    if (trace.domains.empty() || trace.domains.back().step != s.step) {
      DomainRecord d;
      d.step = s.step;
      d.vertex = s.vertex;
      d.t_start = s.t;
      d.first_sample = idx;
      trace.domains.push_back(d);
    }
    trace.domains.back().t_end = s.t;
    trace.domains.back().end_sample = idx + 1;
    trace.samples.push_back(std::move(s));
  }
  return trace;
}

}  // namespace sepsim
