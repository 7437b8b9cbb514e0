"""Explore the simulated transport: wire sizes, loss, reordering, and
motion-to-photon latency under different link models.

Run:  python demos/04_streaming_latency.py
"""

import numpy as np

from splatteleop import LinkModel, measure_m2p
from splatteleop.channels import frame_channel, probe_stream_m2p
from splatteleop.fusion import DepthFrame
from splatteleop.wire import encode_frame, quantize_disparity


def frame_of(seq, w=160, h=90, seed=0):
    rng = np.random.default_rng(seed + seq)
    return DepthFrame(
        seq=seq, timestamp_us=seq * 33_333, width=w, height=h,
        disparity=quantize_disparity(rng.uniform(0.05, 30.0, (h, w))),
        color=rng.integers(0, 256, (h, w, 3), dtype=np.uint8),
    )


def main():
    f = frame_of(0)
    buf = encode_frame(f)
    px = f.width * f.height
    print(f"wire frame {f.width}x{f.height}: {len(buf)} bytes "
          f"(27-byte header + {px} px * 5 bytes); "
          f"disparity quantized to 1/256 units\n")

    print("delivery under loss and jitter (2000 frames at 30 fps):")
    for loss, jitter in [(0.0, 0.0), (0.1, 10.0), (0.3, 33.0)]:
        tx, rx = frame_channel(LinkModel(60.0, jitter, loss, seed=5))
        for i in range(2000):
            tx.send(frame_of(i, w=2, h=2), now_us=i * 33_333)
        got = rx.poll(now_us=2000 * 33_333 + 5_000_000)
        print(f"  loss={loss:.0%} jitter={jitter:4.0f}ms -> delivered "
              f"{len(got) / 2000:6.1%}, stale-dropped {rx.stale_dropped:3d} "
              f"(reordered arrivals discarded)")

    print("\nmotion-to-photon estimates over 1000 probe frames:")
    for label, link in [
        ("local loopback   ", LinkModel(0.0, 0.0, 0.0, seed=1)),
        ("wired LAN        ", LinkModel(18.0, 4.0, 0.0, seed=1)),
        ("calibrated target", LinkModel.calibrated_m2p(seed=1)),
    ]:
        stats = measure_m2p(probe_stream_m2p(link, n_frames=1000))
        print(f"  {label}: mean {stats['mean_ms']:7.2f} ms  "
              f"std {stats['std_ms']:6.2f} ms  "
              f"range [{stats['min_ms']:.1f}, {stats['max_ms']:.1f}]")

    print("\nthe calibrated target reproduces the published 153.47 +/- 33.33 ms "
          "streaming estimate on the virtual clock")


if __name__ == "__main__":
    main()
