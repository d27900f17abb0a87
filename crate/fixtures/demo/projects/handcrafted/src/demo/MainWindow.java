package demo;

import javax.swing.JFrame;
import javax.swing.SwingUtilities;

public class MainWindow {
    void show(JFrame frame) {
        frame.setVisible(true);
    }
}
