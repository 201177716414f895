"""Smoke test for the plantrack Python extension.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml --release`.
"""

import json
import sys

import plantrack_py as pt


def main() -> int:
    assert abs(pt.iou((0, 0, 2, 2), (1, 0, 3, 2)) - 1 / 3) < 1e-12
    assert pt.giou((0, 0, 1, 1), (0, 0, 1, 1)) == 1.0
    assert sorted(pt.hungarian([[4.0, 1.0], [2.0, 3.0]])) == [(0, 1), (1, 0)]
    t, p = pt.welch_t_test([1, 2, 3, 4, 5], [101, 102, 103, 104, 105])
    assert abs(t + 100) < 1e-9 and p < 1e-6

    tracker = pt.Tracker()
    feature = [1.0] + [0.0] * 7
    first = tracker.step([((0, 0, 5, 5), 0.9, feature, (0.1, 0.0, 0.5))])
    second = tracker.step([((1, 0, 6, 5), 0.9, feature, (0.1, 0.0, 0.5))])
    assert first[0][0] == second[0][0]

    cfg = json.loads(pt.default_trial_config())
    cfg["sequence_length"] = 20
    cfg["viewpoint_pool_size"] = 40
    out = json.loads(pt.run_trial(7, json.dumps(cfg)))
    report = out["report"]
    print(
        f"HOTA {report['hota']:.2f}  DetA {report['det_a']:.2f}  AssA {report['ass_a']:.2f}  "
        f"tracklets {out['tracklet_count']} / tomatoes {out['gt_ids_seen']}",
        file=sys.stderr,
    )
    print("smoke test ok", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
