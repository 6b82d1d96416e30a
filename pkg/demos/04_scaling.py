"""
Support size and memory as the clouds grow
===========================================

For independent uniform clouds the stored support stays at a few entries per
point, so plan memory grows roughly linearly while the dense cost and plan
grow quadratically. The full sweep used by the acceptance suite (50 trials
up to 16384 points) takes a few minutes; this demo uses a short grid. The
same sweep is available from the command line:

    apml bench-nnz --n-list 1024,2048,4096 --trials 5 --out nnz.csv
"""

from apml import loglog_slope, memory_estimate, nnz_scaling_sweep

records = nnz_scaling_sweep([512, 1024, 2048, 4096], trials=5, seed=0)
print(f"{'N':>6} {'nnz/N':>7} {'sparse MB':>10} {'dense MB':>10} {'reduction':>10}")
for r in records:
    print(f"{r.n:6d} {r.nnz_mean / r.n:7.2f} {r.sparse_bytes_mean / 1e6:10.3f} "
          f"{r.dense_bytes / 1e6:10.1f} {r.reduction_ratio:10.5f}")
print(f"log-log slope of nnz vs N: {loglog_slope(records):.3f}")

# byte model at larger sizes, assuming ~4 entries per point
for n in (16384, 32768, 65536):
    est = memory_estimate(4 * n, n, n)
    print(f"N={n}: dense {est.dense_bytes / 1e9:.2f} GB, sparse {est.sparse_bytes / 1e6:.2f} MB, "
          f"reduction {est.reduction_ratio:.5f}")
