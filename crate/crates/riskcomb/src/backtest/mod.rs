//! Rolling-window backtest.
