import pandas as pd


RENAME_MAPS = {
    # Per-run rows as they appear in results.csv
    "results": {
        "p": "p",
        "n": "n",
        "k": "card_true",
        "gamma": "gamma",
        "seed": "seed",
        "method": "method",
        "label": "method_label",
        "objective": "F",
        "fstar": "F_ref",
        "rdf": "RDF_%",
        "abs_gap": "gap",
        "rdf_mode": "gap_mode",
        "card": "card",
        "kkt_res": "KKTres",
        "iters": "iter",
        "termination": "termination",
        "result": "result",
    },
    # Per-cell aggregates from benchmark.summarize
    "summary": {
        "p": "p",
        "n": "n",
        "k": "card_true",
        "gamma": "gamma",
        "method": "method",
        "rdf_median": "RDF_median_%",
        "rdf_max": "RDF_max_%",
        "card_mean": "card",
        "iters_mean": "iter",
        "runs": "runs",
        "failures": "failures",
    },
    "timings": {
        "p": "p",
        "n": "n",
        "k": "card_true",
        "gamma": "gamma",
        "seed": "seed",
        "method": "method",
        "time_s": "t_s",
    },
}


def format_fields(table_name: str, df: pd.DataFrame) -> pd.DataFrame:
    """Rename report columns to their display headers for the given table."""
    rename_map = RENAME_MAPS.get(table_name)
    if rename_map is None:
        raise ValueError(f"Unknown table_name '{table_name}'.")

    return df.rename(columns=rename_map)
