"""CSV and JSON file formats shared by the command-line tools.

Floats are written with ``repr`` (shortest round-trip form), so rewriting a
file from the same arrays is byte-identical and reading recovers the exact
float64 values.
"""

import csv

import numpy as np


def _fmt(x):
    return repr(float(x))


def write_dataset_csv(path, ids, y, a, x):
    q = x.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "Y", "A"] + [f"X{j + 1}" for j in range(q)])
        for i in range(len(ids)):
            w.writerow([int(ids[i]), _fmt(y[i]), int(a[i])] + [_fmt(v) for v in x[i]])


def read_dataset_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:3] != ["id", "Y", "A"]:
            raise ValueError(f"unexpected dataset header: {header[:3]}")
        rows = list(r)
    ids = np.array([int(row[0]) for row in rows])
    y = np.array([float(row[1]) for row in rows])
    a = np.array([float(row[2]) for row in rows])
    x = np.array([[float(v) for v in row[3:]] for row in rows])
    return ids, y, a, x


def write_images_csv(path, ids, grid, images):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "s1", "s2", "value"])
        for i in range(len(ids)):
            sid = int(ids[i])
            for j in range(grid.shape[0]):
                w.writerow([sid, _fmt(grid[j, 0]), _fmt(grid[j, 1]), _fmt(images[i, j])])


def read_images_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["id", "s1", "s2", "value"]:
            raise ValueError(f"unexpected images header: {header}")
        rows = list(r)
    by_id = {}
    order = []
    for row in rows:
        sid = int(row[0])
        if sid not in by_id:
            by_id[sid] = []
            order.append(sid)
        by_id[sid].append((float(row[1]), float(row[2]), float(row[3])))
    first = np.array([(s1, s2) for s1, s2, _ in by_id[order[0]]])
    images = np.empty((len(order), first.shape[0]))
    for i, sid in enumerate(order):
        block = np.array(by_id[sid])
        if block.shape[0] != first.shape[0] or not np.array_equal(block[:, :2], first):
            raise ValueError(f"subject {sid} uses a different pixel grid")
        images[i] = block[:, 2]
    return np.array(order), first, images


def write_raster_csv(path, points, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s1", "s2", "value"])
        for p, v in zip(points, values):
            w.writerow([_fmt(p[0]), _fmt(p[1]), _fmt(v)])


def write_recommendations_csv(path, ids, actions, contrasts, q0, q1):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "action", "contrast", "q0", "q1"])
        for i in range(len(ids)):
            w.writerow(
                [int(ids[i]), int(actions[i]), _fmt(contrasts[i]), _fmt(q0[i]), _fmt(q1[i])]
            )
