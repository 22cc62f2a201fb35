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

#include <cmath>
#include <string>

#include "sepsim/multibody.hpp"

namespace sepsim {

int JointDofs(JointKind kind) {
  switch (kind) {
    case JointKind::kPlanarBase: return 3;
    case JointKind::kRevolute: return 1;
    case JointKind::kFixed3Dof: return 3;
  }
  return 0;
}

Eigen::Matrix2d Rotation(double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

RobotModel::RobotModel(std::vector<BodySpec> bodies, MatrixXd actuation,
                       double gravity, std::vector<FrameSpec> extra_frames)
    : bodies_(std::move(bodies)),
      actuation_(std::move(actuation)),
      gravity_(gravity) {
  if (bodies_.empty()) {
    throw Error(ErrorKind::kConfig, "model has no bodies");
  }
  if (bodies_[0].joint != JointKind::kPlanarBase || bodies_[0].parent != -1) {
    throw Error(ErrorKind::kConfig, "body 0 must be the planar-base root");
  }
  coord_start_.resize(bodies_.size());
  ancestors_.resize(bodies_.size());
  for (int i = 0; i < num_bodies(); ++i) {
    const BodySpec& b = bodies_[i];
    const LinkParams& l = b.link;
    if (!(l.mass > 0.0) || !(l.length > 0.0) || l.com_offset < 0.0 ||
        l.com_offset > l.length || l.inertia < 0.0) {
      throw Error(ErrorKind::kConfig, "invalid link parameters for " + b.name);
    }
    if (i > 0) {
      if (b.joint == JointKind::kPlanarBase) {
        throw Error(ErrorKind::kConfig, "only the root may be a planar base");
      }
      if (b.parent < 0 || b.parent >= i) {
        throw Error(ErrorKind::kConfig,
                    "bodies must be ordered parent-first: " + b.name);
      }
      ancestors_[i] = ancestors_[b.parent];
    }
    ancestors_[i].push_back(i);
    coord_start_[i] = dof_;
    dof_ += JointDofs(b.joint);
    frames_.push_back({b.name, i, Vector2d::Zero()});
  }
  for (auto& f : extra_frames) {
    if (f.body < 0 || f.body >= num_bodies()) {
      throw Error(ErrorKind::kConfig, "frame on unknown body: " + f.name);
    }
    frames_.push_back(std::move(f));
  }
  if (actuation_.rows() != dof_) {
    throw Error(ErrorKind::kDimensionMismatch,
                "actuation map must have one row per coordinate");
  }
  if (actuation_.cols() > 0 &&
      NumericalRank(actuation_) != actuation_.cols()) {
    throw Error(ErrorKind::kRankDeficient,
                "actuation map must have full column rank");
  }
}

int RobotModel::body_index(std::string_view name) const {
  for (int i = 0; i < num_bodies(); ++i) {
    if (bodies_[i].name == name) return i;
  }
  throw Error(ErrorKind::kUnknownFrame, "no body named " + std::string(name));
}

FrameId RobotModel::frame(std::string_view name) const {
  for (int i = 0; i < num_frames(); ++i) {
    if (frames_[i].name == name) return FrameId{i};
  }
  throw Error(ErrorKind::kUnknownFrame, "no frame named " + std::string(name));
}

const FrameSpec& RobotModel::frame_spec(FrameId id) const {
  if (id.index < 0 || id.index >= num_frames()) {
    throw Error(ErrorKind::kUnknownFrame,
                "frame id " + std::to_string(id.index) + " out of range");
  }
  return frames_[id.index];
}

double RobotModel::total_mass() const {
  double m = 0.0;
  for (const auto& b : bodies_) m += b.link.mass;
  return m;
}

int NumericalRank(const MatrixXd& m, double relative_threshold) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s(i) > relative_threshold * s(0)) ++rank;
  }
  return rank;
}

}  // namespace sepsim
