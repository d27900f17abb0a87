package demo;

import java.io.IOException;
import java.io.Writer;

public class DataStore {
    void store(Writer out, String data) throws IOException {
        try {
            out.write(data);
        } finally {
            out.close();
        }
    }
}
