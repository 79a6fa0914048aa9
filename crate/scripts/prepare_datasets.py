"""Write SUPPORT2, COLON and Aids2 as CSV plus schema files.

The tables come from the SurvSet package (pip install SurvSet), which ships
them as pickles. Continuous columns are prefixed `num_`, categorical ones
`fac_`; `time` is in days and `event` is 1 for an observed death.

    python scripts/prepare_datasets.py --out data
    python scripts/prepare_datasets.py --pickles /path/to/SurvSet/resources/pickles --out data
"""

import argparse
import pathlib

import pandas as pd

DATASETS = {"support2": "support2", "colon": "colon", "aids2": "Aids2"}


def pickle_dir(explicit):
    if explicit:
        return pathlib.Path(explicit)
    import SurvSet

    return pathlib.Path(SurvSet.__file__).parent / "resources" / "pickles"


def schema_for(df):
    lines = ['missing = ["", "NA"]', "", "[columns]", 'time = "time"', 'event = "event_indicator"']
    for col in df.columns:
        if col.startswith("num_"):
            lines.append(f'{col} = "continuous"')
        elif col.startswith("fac_"):
            lines.append(f'{col} = "categorical"')
    return "\n".join(lines) + "\n"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pickles", help="directory holding the SurvSet pickles")
    parser.add_argument("--out", default="data")
    args = parser.parse_args()

    src = pickle_dir(args.pickles)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, stem in DATASETS.items():
        df = pd.read_pickle(src / f"{stem}.pickle")
        df["event"] = df["event"].astype(int)
        df.to_csv(out / f"{name}.csv", index=False, na_rep="NA")
        (out / f"{name}.toml").write_text(schema_for(df))
        censored = int((df["event"] == 0).sum())
        print(f"{name}: {len(df)} rows, {censored} censored, {df['time'].nunique()} unique times")


if __name__ == "__main__":
    main()
