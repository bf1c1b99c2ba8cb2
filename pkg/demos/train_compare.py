"""Training HNO and FNO side by side on one of the benchmark problems.

The script generates a dataset, trains one network with Hilbert spectral
layers and one with plain Fourier layers from the same seed, and prints the
validation curves. The defaults are a quick, reduced run that takes under
two minutes per problem. ``--desk`` uses the full desk-scale dataset and
model sizes, which takes several minutes per model.

    python3 demos/train_compare.py burgers1d
    python3 demos/train_compare.py darcy2d --desk
"""
import argparse
import time

from hno import datagen, training

QUICK = {
    "burgers1d": (
        dict(n_samples=160, resolution=128),
        dict(width=16, modes=12, proj_width=32, epochs=25, batch_size=8, learning_rate=3e-3),
    ),
    "darcy2d": (
        dict(n_samples=120, resolution=32),
        dict(width=12, modes=8, proj_width=32, epochs=20, batch_size=8, learning_rate=3e-3),
    ),
    "lorenz63": (
        dict(n_samples=120, n_points=512, dt=0.04),
        dict(width=16, modes=16, proj_width=32, epochs=25, batch_size=8, learning_rate=3e-3),
    ),
}
MAKERS = {
    "burgers1d": datagen.make_burgers_dataset,
    "darcy2d": datagen.make_darcy_dataset,
    "lorenz63": datagen.make_lorenz_dataset,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("problem", choices=sorted(MAKERS))
    ap.add_argument("--desk", action="store_true", help="full desk-scale data and model")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data_kw, train_kw = ({}, {}) if args.desk else QUICK[args.problem]
    t0 = time.perf_counter()
    data = MAKERS[args.problem](seed=args.seed, **data_kw)
    print(f"generated {len(data)} samples of shape {data.inputs.shape[1:]} in {time.perf_counter() - t0:.1f}s")

    reports = {}
    for kind in ("hno", "fno"):
        cfg = training.desk_config(args.problem, layer_kind=kind, seed=args.seed, **train_kw)
        t0 = time.perf_counter()
        _, reports[kind] = training.train(data, cfg)
        print(f"trained {kind.upper()} for {cfg.epochs} epochs in {time.perf_counter() - t0:.1f}s")

    print("\nepoch   HNO val rel-L2   FNO val rel-L2")
    for i, (h, f) in enumerate(zip(reports["hno"].val_rel_l2, reports["fno"].val_rel_l2), 1):
        print(f"{i:5d}   {h:14.4e}   {f:14.4e}")
    h, f = reports["hno"].final_val_rel_l2, reports["fno"].final_val_rel_l2
    print(f"\nbest validation: HNO {h:.4e}, FNO {f:.4e}, ratio {max(h, f) / min(h, f):.2f}")


if __name__ == "__main__":
    main()
