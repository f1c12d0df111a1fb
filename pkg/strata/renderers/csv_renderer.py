import csv
import io
import math

import numpy as np

def format_float(value: float) -> str:
    """Shortest text that reads back to the same float64."""
    return repr(float(value))


def format_value(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format_float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def render_csv(rows: list[dict]) -> io.StringIO:
    stream = io.StringIO()
    if not rows:
        return stream
    headers = list(rows[0].keys())
    writer = csv.DictWriter(
        stream,
        fieldnames=headers,
        quotechar='"',
        quoting=csv.QUOTE_MINIMAL,
        lineterminator="\n",
    )
    writer.writeheader()

    for row in rows:
        writer.writerow({k: format_value(v) for k, v in row.items()})

    stream.seek(0)
    return stream
