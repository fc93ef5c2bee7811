from typing import Sequence

import pandas as pd
import streamlit as st

from channel_model import FadingConfig, NodePosition, SystemGeometry, generate_channel
from errors import SecRelayError, ConfigError
from mode_selection import Policy, decide_subcarriers

DEFAULT_USERS = "2.0, 0.3\n2.2, -0.2\n1.8, 0.1\n2.4, 0.4"


def parse_user_lines(text: str) -> list:
    """One 'x, y' pair per line; blank lines are skipped."""
    users = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = [p for p in line.replace(",", " ").split() if p]
        if len(parts) != 2:
            raise ConfigError(f"line {number}: expected 'x, y', got {line.strip()!r}")
        try:
            users.append(NodePosition(float(parts[0]), float(parts[1])))
        except ValueError as e:
            raise ConfigError(f"line {number}: {e}") from e
    return users


def geometry_from_inputs(source: Sequence[float], relay: Sequence[float], user_text: str) -> SystemGeometry:
    return SystemGeometry(NodePosition.from_pair(source), NodePosition.from_pair(relay), parse_user_lines(user_text))


def mode_summary(frame: pd.DataFrame) -> pd.DataFrame:
    counts = frame["mode"].value_counts().reindex(["RC", "DC", "IDLE"], fill_value=0)
    return pd.DataFrame({
        "mode": counts.index,
        "subcarriers": counts.values,
        "secure rate": [frame.loc[frame["mode"] == m, "secure_rate"].sum() for m in counts.index],
    })


def show():
    st.title("Inspect a channel")

    col1, col2 = st.columns(2)
    with col1:
        st.markdown("#### Nodes")
        sx = st.number_input("Source x", value=0.0)
        sy = st.number_input("Source y", value=0.0)
        rx = st.number_input("Relay x", value=0.5)
        ry = st.number_input("Relay y", value=0.0)
        user_text = st.text_area("Users (one 'x, y' per line)", value=DEFAULT_USERS)
    with col2:
        st.markdown("#### Fading and power")
        num_subcarriers = int(st.number_input("Subcarriers", min_value=1, value=16, step=1))
        seed = int(st.number_input("Seed", min_value=0, value=0, step=1))
        eta = st.number_input("Path-loss exponent", min_value=0.0, value=3.0)
        power_mode = st.radio("Source power", ("Fixed P_s", "Satisfaction level alpha"))
        if power_mode == "Fixed P_s":
            p_source, alpha = st.number_input("P_s per subcarrier", min_value=0.0, value=0.1, format="%.4f"), None
            policy = Policy(st.selectbox("Policy", [p.value for p in Policy if p is not Policy.SATISFACTION]))
        else:
            p_source, alpha = None, st.number_input("alpha", min_value=0.0, value=1.0)
            policy = Policy(st.selectbox("Policy", [p.value for p in Policy], index=3))

    if st.button("Draw channel and decide modes"):
        try:
            geometry = geometry_from_inputs((sx, sy), (rx, ry), user_text)
            channel = generate_channel(geometry, FadingConfig(num_subcarriers, eta, 1.0, seed))
            frame = decide_subcarriers(channel, policy, p_source=p_source, alpha=alpha)
        except SecRelayError as e:
            st.error(f"Could not evaluate this setup: {e}")
            return

        st.markdown("#### Per-subcarrier decision")
        st.dataframe(frame, hide_index=True)
        st.markdown("#### Summary")
        st.dataframe(mode_summary(frame), hide_index=True)
