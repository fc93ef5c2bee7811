import streamlit as st

def show():
    st.title("SecRelay")
    st.write("Pick a view from the sidebar to start.")

    st.markdown("---")
    st.markdown("### About")
    st.markdown("""
    <div style="background-color: #f8f9fa; padding: 1.5rem; border-radius: 0.5rem; border-left: 4px solid #007bff;">
        <p style="margin: 0; font-size: 1rem; line-height: 1.6; color: #333333;">
            <strong style="color: #1a1a1a;">Secure-rate simulator for a decode-and-forward relay OFDMA downlink</strong><br>
            <span style="color: #444444;">Every user is a potential eavesdropper. Each subcarrier is served either directly (DC) or through the relay with maximal-ratio combining (RC), whichever gives the main user the larger secure rate.</span><br><br>
            <span style="color: #444444;">Inspect a channel: place nodes, draw fading and see allocation and mode decisions per subcarrier.</span><br>
            <span style="color: #444444;">Run an experiment: relay position sweep, mode-selection gain or relay utility region, with CSV and Word downloads.</span>
        </p>
    </div>
    """, unsafe_allow_html=True)
