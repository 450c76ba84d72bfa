"""Independent reference computations shared by several test modules."""

import numpy as np


def parent_walk(tree, contacts):
    """Active set by walking parent links from each contact until the waist."""
    actuated = set(tree.actuated)
    active = set()
    i = tree.waist_index
    while i is not None:  # the waist and whatever actuated joints lie above it
        if i in actuated:
            active.add(i)
        i = tree.joints[i].parent
    for c in contacts:
        i = c
        while True:
            if i in actuated:
                active.add(i)
            if i == tree.waist_index or tree.joints[i].parent is None:
                break
            i = tree.joints[i].parent
    return active


def toy_sit_oracle(seq, scene, eps=0.02):
    """Brute-force interval and labels for the planar toy robot.

    Positions come from the planar chain's own body frames, not from the 3-D
    tree, so FK, CoM and support are computed along a separate path. The feet
    lie on the y = 0 line, so the support polygon is an x-interval.
    """
    from weightless.toy import CONTACT_POINTS, FEET, JOINTS, motion_to_states, toy_chain

    chain = toy_chain()
    names = chain.contact_point_names()
    states = motion_to_states(seq)
    box = scene.boxes[0]
    lo_x, hi_x = box.center[0] - box.half_extents[0], box.center[0] + box.half_extents[0]
    top = box.center[2] + box.half_extents[2]

    def dist(p):
        x, z = p
        dg = z - scene.ground_height
        qx = max(lo_x - x, 0.0, x - hi_x)
        qz = max(z - top, 0.0, scene.ground_height - z)
        if qx == 0 and qz == 0:
            db = max(lo_x - x, x - hi_x, z - top, scene.ground_height - z)
        else:
            db = np.hypot(qx, qz)
        return min(dg, db)

    # parent chain of the toy robot: waist under pelvis; hip -> knee -> ankle
    owner = {"pelvis": None, "pelvis_tip": None, "torso_tip": "waist", "thigh_tip": "knee",
             "shin_tip": "ankle", "foot_tip": "ankle"}
    ancestors = {"waist": ["waist"], "knee": ["knee", "hip"], "ankle": ["ankle", "knee", "hip"], None: []}
    n = len(seq)
    in_I = np.zeros(n, bool)
    labels = np.zeros((n, len(JOINTS)), np.uint8)
    for t in range(n):
        pts = dict(zip(names, chain.contact_point_positions(states[t])))
        com_x = chain.com(states[t])[0]
        feet_x = [pts[f][0] for f in FEET if dist(pts[f]) <= eps]
        inside = bool(feet_x) and min(feet_x) - 1e-9 <= com_x <= max(feet_x) + 1e-9
        touching = [c for c in CONTACT_POINTS if c not in FEET and dist(pts[c]) <= eps]
        in_I[t] = (not inside) and bool(touching)
        if in_I[t]:
            active = {"waist"}
            for c in touching:
                active.update(ancestors[owner[c]])
            labels[t] = [0 if j in active else 1 for j in JOINTS]
    return in_I, labels
