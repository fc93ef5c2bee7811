import dataclasses

import numpy as np
import pandas as pd
import streamlit as st

from checks import evaluate_claims
from errors import SecRelayError
from experiments import EXPERIMENTS, MIN_REGION_LOCATIONS, ExperimentConfig, SweepResult, run_experiment
from sweep_report import generate_sweep_report


def experiment_chart_frame(result: SweepResult) -> pd.DataFrame:
    """Wide frame for st.line_chart: x axis in the index, one column per series."""
    table = result.table
    if result.experiment == "relay-sweep":
        wide = table.pivot(index="relay_x", columns="alpha", values="pct_rc_mean")
        wide.columns = [f"alpha={a:g}" for a in wide.columns]
        return wide
    if result.experiment == "mode-gain":
        wide = table.pivot(index="source_power", columns="policy", values="improvement_pct_mean")
        wide.columns = list(wide.columns)
        return wide
    # utility region: mean RC share per distance ring, one line per side of the S-R midpoint
    rings = np.floor(table["distance_to_relay"] / 0.25) * 0.25 + 0.125
    frame = table.assign(distance=rings, side=table["side"].map({1: "source side", -1: "far side"}))
    wide = frame.groupby(["distance", "side"])["pct_rc"].mean().unstack("side")
    wide.columns = list(wide.columns)
    return wide


def small_config(num_subcarriers: int, trials: int, seed: int) -> ExperimentConfig:
    base = ExperimentConfig(num_subcarriers=num_subcarriers, trials=trials, master_seed=seed)
    region = dataclasses.replace(base.utility_region, locations=MIN_REGION_LOCATIONS, trials_per_location=2)
    return dataclasses.replace(base, utility_region=region)


def show():
    st.title("Run an experiment")

    name = st.selectbox("Experiment", sorted(EXPERIMENTS))
    col1, col2, col3 = st.columns(3)
    with col1:
        num_subcarriers = int(st.number_input("Subcarriers", min_value=1, value=16, step=1))
    with col2:
        trials = int(st.number_input("Trials", min_value=1, value=20, step=1))
    with col3:
        seed = int(st.number_input("Master seed", min_value=0, value=2017, step=1))
    if name == "utility-region":
        st.caption(f"Utility region uses {MIN_REGION_LOCATIONS} locations with 2 trials each here.")

    if st.button("Run"):
        try:
            with st.spinner("Simulating..."):
                result = run_experiment(name, small_config(num_subcarriers, trials, seed), workers=1)
        except SecRelayError as e:
            st.error(f"Experiment failed: {e}")
            return

        st.line_chart(experiment_chart_frame(result))

        st.markdown("#### Claims")
        claims = evaluate_claims(result)
        for claim in claims:
            icon = "✅" if claim.passed else "❌"
            st.markdown(f"{icon} **{claim.name}**: {claim.detail}")

        st.markdown("#### Table")
        st.dataframe(result.to_frame(), hide_index=True)

        st.markdown("--- ")
        st.download_button(
            label="📥 Download CSV",
            data=result.to_csv_text(),
            file_name=f"{name}.csv",
            mime="text/csv"
        )
        try:
            report_stream = generate_sweep_report(result, claims)
            st.download_button(
                label="📥 Download report (Word)",
                data=report_stream,
                file_name=f"{name}_report.docx",
                mime="application/vnd.openxmlformats-officedocument.wordprocessingml.document"
            )
        except Exception as e:
            st.error(f"Could not build the Word report: {e}")
