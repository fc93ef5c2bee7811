import streamlit as st

def show_disclaimer():
    st.markdown("""
    <div style="background-color: #fff3cd; color: #856404; padding: 1rem; border-radius: 0.5rem; margin-bottom: 1.5rem; border: 1px solid #ffeeba;">
        <p style="font-weight: bold; font-size: 1.1rem; margin: 0;">🚨 Note</p>
        <p style="margin: 0.5rem 0 0 0;">
            Results are Monte-Carlo estimates under the Rayleigh block-fading model with equal power per subcarrier. Small trial counts in this dashboard are for exploration; use the command line for full runs.
        </p>
    </div>
    """, unsafe_allow_html=True)

st.set_page_config(
    page_title="SecRelay",
    page_icon="📡",
    layout="wide"
)

import main_page
import channel_check
import experiment_check


st.sidebar.title("Menu")
page = st.sidebar.radio(
    "Choose a view",
    (
        "Home",
        "Inspect a channel",
        "Run an experiment"
    )
)

# Show disclaimer on all pages
show_disclaimer()

if page == "Home":
    main_page.show()
elif page == "Inspect a channel":
    channel_check.show()
elif page == "Run an experiment":
    experiment_check.show()
