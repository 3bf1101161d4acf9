#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mfusion/dataset.hpp"
#include "mfusion/errors.hpp"
#include "mfusion/rng.hpp"

namespace mfusion::data {
namespace {

struct ObjectTrack {
    bool present = false;
    double cx = 0, cy = 0, w = 0, h = 0;
    int class_id = 0;
};

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Largest-remainder apportionment so generated class counts track the
// requested distribution exactly (a multinomial draw could starve a class
// and break stratified splitting for small n).
std::array<std::size_t, 5> apportion(std::size_t n, const std::array<double, 5>& dist) {
    std::array<std::size_t, 5> counts{};
    std::array<double, 5> frac{};
    std::size_t assigned = 0;
    for (int c = 0; c < 5; ++c) {
        double q = static_cast<double>(n) * dist[c];
        counts[c] = static_cast<std::size_t>(std::floor(q));
        frac[c] = q - std::floor(q);
        assigned += counts[c];
    }
    std::array<int, 5> order = {0, 1, 2, 3, 4};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) counts[order[i % 5]] += 1;
    return counts;
}

int side_of(int label) {
    if (label == feat::kLeftLaneChange || label == feat::kLeftTurn) return -1;
    if (label == feat::kRightLaneChange || label == feat::kRightTurn) return 1;
    return 0;
}

}  // namespace

void DatasetManifest::recount() {
    class_counts.fill(0);
    for (const auto& s : sequences) {
        if (s.label < 0 || s.label >= static_cast<int>(feat::kNumClasses))
            throw ValidationError("manifest label out of range: " + std::to_string(s.label));
        class_counts[static_cast<std::size_t>(s.label)] += 1;
    }
}

DatasetManifest generate_synthetic(const SynthConfig& config) {
    if (config.n_sequences == 0) throw ValidationError("n_sequences must be positive");
    double sum = 0;
    for (double p : config.class_distribution) {
        if (p < 0) throw ValidationError("class_distribution entries must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("class_distribution must sum to 1");
    if (config.gaze_signal_strength < 0 || config.gaze_signal_strength > 1)
        throw ValidationError("gaze_signal_strength must lie in [0, 1]");
    if (config.exterior_signal_strength < 0 || config.exterior_signal_strength > 1)
        throw ValidationError("exterior_signal_strength must lie in [0, 1]");
    if (config.noise_sigma < 0) throw ValidationError("noise_sigma must be non-negative");

    std::array<std::size_t, 5> counts = apportion(config.n_sequences, config.class_distribution);
    std::vector<int> labels;
    labels.reserve(config.n_sequences);
    for (int c = 0; c < 5; ++c) labels.insert(labels.end(), counts[static_cast<std::size_t>(c)], c);
    Rng label_rng = Rng::substream(config.seed, config.n_sequences);
    label_rng.shuffle(labels);

    DatasetManifest out;
    out.source = "synthetic";
    out.sequences.reserve(config.n_sequences);

    for (std::size_t i = 0; i < config.n_sequences; ++i) {
        // Every sequence gets its own substream so inserting or removing a
        // sequence never perturbs its neighbours.
        Rng rng = Rng::substream(config.seed, i);
        int label = labels[i];
        int side = side_of(label);
        bool is_turn = label == feat::kLeftTurn || label == feat::kRightTurn;

        // 1. exterior context: informative with probability
        //    exterior_signal_strength, otherwise drawn identically for every
        //    label (and thus carrying no label information).
        bool informative = rng.bernoulli(config.exterior_signal_strength);
        feat::LaneInfo lane;
        bool left_occupied = false, right_occupied = false;
        if (!informative) {
            lane.num_lanes = 3;
            lane.lane_position = 2;
            lane.near_intersection = rng.bernoulli(0.2) ? 1 : 0;
            left_occupied = rng.bernoulli(0.5);
            right_occupied = rng.bernoulli(0.5);
        } else if (label == feat::kStraight) {
            lane.near_intersection = 0;
            if (rng.bernoulli(0.5)) {  // single-lane road
                lane.num_lanes = 1;
                lane.lane_position = 1;
            } else {  // boxed in on both sides
                lane.num_lanes = 3;
                lane.lane_position = 2;
                left_occupied = right_occupied = true;
            }
        } else if (is_turn) {
            lane.near_intersection = 1;
            lane.num_lanes = 1 + static_cast<int>(rng.uniform_int(3));  // 1..3
            lane.lane_position = side < 0 ? 1 : lane.num_lanes;         // turn from the edge lane
            if (side < 0)
                right_occupied = rng.bernoulli(0.3);
            else
                left_occupied = rng.bernoulli(0.3);
        } else {  // lane change: the target lane exists and is free
            lane.near_intersection = 0;
            lane.num_lanes = 2 + static_cast<int>(rng.uniform_int(3));  // 2..4
            if (side < 0) {
                lane.lane_position = 2 + static_cast<int>(rng.uniform_int(
                                             static_cast<std::uint64_t>(lane.num_lanes - 1)));
                right_occupied = rng.bernoulli(0.5);
            } else {
                lane.lane_position = 1 + static_cast<int>(rng.uniform_int(
                                             static_cast<std::uint64_t>(lane.num_lanes - 1)));
                left_occupied = rng.bernoulli(0.5);
            }
        }
        // adjacency only exists inside the road
        left_occupied = left_occupied && lane.lane_position >= 2;
        right_occupied = right_occupied && lane.lane_position < lane.num_lanes;

        // 2. object tracks: lead vehicle, flanking vehicles in occupied
        //    adjacent lanes, occasional pedestrian. Base geometry per track.
        std::array<ObjectTrack, 4> tracks{};
        bool lead = rng.bernoulli(0.4);
        bool pedestrian = rng.bernoulli(0.3);
        if (lead) {
            tracks[0] = {true, 0.5 + 0.02 * rng.gaussian(), 0.45 + 0.02 * rng.gaussian(),
                         0.16 * (1 + 0.1 * rng.gaussian()), 0.13 * (1 + 0.1 * rng.gaussian()), 0};
        }
        if (left_occupied) {
            tracks[1] = {true, 0.25 + 0.03 * rng.gaussian(), 0.55 + 0.02 * rng.gaussian(),
                         0.14 * (1 + 0.1 * rng.gaussian()), 0.12 * (1 + 0.1 * rng.gaussian()), 0};
        }
        if (right_occupied) {
            tracks[2] = {true, 0.75 + 0.03 * rng.gaussian(), 0.55 + 0.02 * rng.gaussian(),
                         0.14 * (1 + 0.1 * rng.gaussian()), 0.12 * (1 + 0.1 * rng.gaussian()), 0};
        }
        if (pedestrian) {
            tracks[3] = {true, 0.1 + 0.8 * rng.uniform(), 0.5 + 0.02 * rng.gaussian(),
                         0.04 * (1 + 0.15 * rng.gaussian()), 0.1 * (1 + 0.15 * rng.gaussian()), 1};
        }

        // 3. gaze plan: drift toward the maneuver side starting at a sampled
        //    onset, turns sweeping somewhat wider than lane changes (the
        //    magnitudes overlap on purpose: direction is reliable, intent
        //    class from gaze alone is not). Half of the straight clips get a
        //    distractor drift (mirror check with no maneuver behind it), so
        //    exterior context is what disambiguates them.
        std::size_t onset = 30 + rng.uniform_int(91);  // 30..120
        double tau = 10 + 20 * rng.uniform();
        double amp = 0;
        if (side != 0) {
            double mu = is_turn ? 0.8 : 0.6;
            amp = clamp(mu + 0.3 * rng.gaussian(), 0.1, 1.8);
            amp *= config.gaze_signal_strength * side;
        } else if (rng.bernoulli(0.5)) {
            double dside = rng.bernoulli(0.5) ? 1.0 : -1.0;
            amp = clamp(0.45 + 0.15 * rng.gaussian(), 0.1, 0.8);
            amp *= config.gaze_signal_strength * dside;
        }
        double gy_base = -0.1 + 0.05 * rng.gaussian();

        std::vector<std::array<double, feat::kGazeDims>> gaze(feat::kSeqLen);
        std::vector<std::vector<feat::Detection>> objects(feat::kSeqLen);
        std::vector<feat::LaneInfo> lanes(feat::kSeqLen, lane);

        std::size_t saccade_left = 0;
        double saccade_off = 0;
        for (std::size_t t = 0; t < feat::kSeqLen; ++t) {
            if (saccade_left > 0) {
                --saccade_left;
            } else if (rng.bernoulli(0.03)) {
                saccade_left = 3 + rng.uniform_int(6);
                saccade_off = 0.25 * rng.gaussian();
            }
            double sacc = saccade_left > 0 ? saccade_off : 0.0;
            double drift = 0;
            if (amp != 0 && t >= onset)
                drift = amp * (1 - std::exp(-static_cast<double>(t - onset) / tau));
            double s = config.noise_sigma;
            double hx = 0.6 * drift + s * rng.gaussian();
            double hy = 0.6 * gy_base + s * rng.gaussian();
            double gx = drift + sacc + s * rng.gaussian();
            double gy = gy_base + 0.3 * sacc + s * rng.gaussian();
            gaze[t] = {clamp(hx, -2.5, 2.5), clamp(hy, -2.5, 2.5), clamp(gx, -2.5, 2.5),
                       clamp(gy, -2.5, 2.5)};

            for (const ObjectTrack& tr : tracks) {
                if (!tr.present) continue;
                if (rng.bernoulli(0.05)) continue;  // detector dropout
                double bs = 0.5 * config.noise_sigma;
                feat::Detection d;
                d.cx = clamp(tr.cx + bs * rng.gaussian(), 0.005, 0.995);
                d.cy = clamp(tr.cy + bs * rng.gaussian(), 0.005, 0.995);
                d.w = clamp(tr.w + bs * rng.gaussian(), 0.01, 0.6);
                d.h = clamp(tr.h + bs * rng.gaussian(), 0.01, 0.6);
                d.class_id = tr.class_id;
                objects[t].push_back(d);
            }
        }

        char id[32];
        std::snprintf(id, sizeof id, "synth-%06zu", i);
        out.sequences.push_back(feat::assemble_sequence(id, label, gaze, objects, lanes));
    }
    out.recount();
    return out;
}

}  // namespace mfusion::data
